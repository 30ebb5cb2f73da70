#include "spindrive/bloch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "spindrive/numerics.hpp"

namespace spindrive {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

// Per-segment constants so the RK4 stages stay branch-free.
struct SegmentRhs {
    double w1 = 0.0;        // signed amplitude
    double cx = 0.0;        // (dw - w_bs), multiplies My in dMx
    double cy = 0.0;        // (dw - w_bs - d_shift), multiplies -Mx in dMy
    double inv_t1 = 0.0;
    double inv_t2 = 0.0;
    double eta_x = 0.0;
    double eta_y = 0.0;
    double eta_z = 0.0;
    double m0 = 0.0;

    void deriv(const double m[3], double out[3]) const {
        out[0] = cx * m[1] - (inv_t2 + eta_x) * m[0];
        out[1] = -cy * m[0] - w1 * m[2] - (inv_t2 + eta_y) * m[1];
        out[2] = w1 * m[1] - (m[2] - m0) * inv_t1 - eta_z * m[2];
    }
};

SegmentRhs make_rhs(const SpinSystemParams& p, const DriveSegment& seg) {
    const double amp = std::abs(seg.amplitude);
    // Counter-rotating frequency for this segment's drive frequency
    // omega0 + offset: Omega = 2*omega0 + offset.
    const DriveCoefficients c =
        compute_coefficients(amp, 2.0 * p.omega0 + seg.offset, seg.offset, p.tau_c);
    SegmentRhs r;
    r.w1 = seg.amplitude;
    r.cx = seg.offset - c.omega_bs;
    r.cy = seg.offset - c.omega_bs - c.delta_omega_shift;
    r.inv_t1 = std::isinf(p.T1) ? 0.0 : 1.0 / p.T1;
    r.inv_t2 = std::isinf(p.T2) ? 0.0 : 1.0 / p.T2;
    r.eta_x = c.eta_x;
    r.eta_y = c.eta_y;
    r.eta_z = c.eta_z;
    r.m0 = p.M0;
    return r;
}

void rk4_step(const SegmentRhs& rhs, double h, double m[3]) {
    double k1[3], k2[3], k3[3], k4[3], tmp[3];
    rhs.deriv(m, k1);
    for (int i = 0; i < 3; ++i) tmp[i] = m[i] + 0.5 * h * k1[i];
    rhs.deriv(tmp, k2);
    for (int i = 0; i < 3; ++i) tmp[i] = m[i] + 0.5 * h * k2[i];
    rhs.deriv(tmp, k3);
    for (int i = 0; i < 3; ++i) tmp[i] = m[i] + h * k3[i];
    rhs.deriv(tmp, k4);
    for (int i = 0; i < 3; ++i)
        m[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace

DriveProgram DriveProgram::from_segments(std::vector<DriveSegment> segs) {
    DriveProgram prog;
    double total = 0.0;
    for (const auto& s : segs) {
        if (!(s.duration >= 0.0) || !std::isfinite(s.duration))
            fail("DriveProgram: segment duration must be finite and >= 0");
        if (!std::isfinite(s.amplitude) || !std::isfinite(s.offset))
            fail("DriveProgram: segment amplitude/offset must be finite");
        total += s.duration;
    }
    prog.segments = std::move(segs);
    prog.total_duration = total;
    return prog;
}

std::array<double, 3> bloch_derivative(const MagnetizationState& s, const SpinSystemParams& p,
                                       const DriveCoefficients& c, double segment_amplitude,
                                       double segment_offset) {
    const double inv_t1 = std::isinf(p.T1) ? 0.0 : 1.0 / p.T1;
    const double inv_t2 = std::isinf(p.T2) ? 0.0 : 1.0 / p.T2;
    const double cx = segment_offset - c.omega_bs;
    const double cy = segment_offset - c.omega_bs - c.delta_omega_shift;
    std::array<double, 3> d;
    d[0] = cx * s.my - (inv_t2 + c.eta_x) * s.mx;
    d[1] = -cy * s.mx - segment_amplitude * s.mz - (inv_t2 + c.eta_y) * s.my;
    d[2] = segment_amplitude * s.my - (s.mz - p.M0) * inv_t1 - c.eta_z * s.mz;
    return d;
}

std::vector<MagnetizationState> integrate(const MagnetizationState& s0,
                                          const DriveProgram& program,
                                          const SpinSystemParams& p, double step,
                                          int interior_stride) {
    validate(p);
    if (!(step > 0.0) || !std::isfinite(step)) fail("integrate: step must be positive and finite");
    if (interior_stride < 0) fail("integrate: interior_stride must be >= 0");
    if (program.segments.empty()) fail("integrate: program has no segments");

    double min_pos_dur = std::numeric_limits<double>::infinity();
    double max_amp = 0.0;
    for (const auto& seg : program.segments) {
        if (seg.duration > 0.0) min_pos_dur = std::min(min_pos_dur, seg.duration);
        max_amp = std::max(max_amp, std::abs(seg.amplitude));
    }
    if (std::isfinite(min_pos_dur) && step > min_pos_dur / 10.0 * (1.0 + 1e-12))
        fail("integrate: step " + std::to_string(step) +
             " exceeds shortest segment duration / 10 = " + std::to_string(min_pos_dur / 10.0));
    if (max_amp * step > 0.05 * (1.0 + 1e-12))
        fail("integrate: step*max|amplitude| = " + std::to_string(max_amp * step) +
             " exceeds the 0.05 rad per-step rotation bound");

    std::vector<MagnetizationState> out;
    double m[3] = {s0.mx, s0.my, s0.mz};
    double t = s0.t;
    out.push_back({m[0], m[1], m[2], t});

    for (const auto& seg : program.segments) {
        if (seg.duration == 0.0) continue;
        const SegmentRhs rhs = make_rhs(p, seg);
        const double seg_start = t;
        const long n_full = static_cast<long>(std::floor(seg.duration / step));
        const double rem = seg.duration - static_cast<double>(n_full) * step;
        long k = 0;
        for (; k < n_full; ++k) {
            rk4_step(rhs, step, m);
            const double tk = seg_start + static_cast<double>(k + 1) * step;
            const bool last = (k + 1 == n_full) && (rem <= 1e-12 * step);
            if (!last && interior_stride > 0 && (k + 1) % interior_stride == 0)
                out.push_back({m[0], m[1], m[2], tk});
        }
        if (rem > 1e-12 * step) rk4_step(rhs, rem, m);
        t = seg_start + seg.duration;
        out.push_back({m[0], m[1], m[2], t});
    }
    return out;
}

NutationMetrics simulate_cw_nutation(const SpinSystemParams& p, double duration, double step) {
    validate(p);
    if (p.delta_omega() != 0.0)
        fail("simulate_cw_nutation: requires on-resonance drive (delta_omega == 0)");
    if (!(duration > 0.0)) fail("simulate_cw_nutation: duration must be positive");
    if (!(p.omega1 * p.T1 > 1.0) || !(p.omega1 * p.T2 > 1.0))
        fail("simulate_cw_nutation: drive must be underdamped (omega1 > 1/T1 and 1/T2)");

    DriveProgram prog = DriveProgram::from_segments({{p.omega1, duration, 0.0}});
    // interior_stride=1: every substep sampled, needed to resolve crossings.
    const auto traj = integrate({0.0, 0.0, p.M0, 0.0}, prog, p, step, 1);

    const std::size_t n = traj.size();
    std::vector<double> ts(n), mz(n);
    for (std::size_t i = 0; i < n; ++i) {
        ts[i] = traj[i].t;
        mz[i] = traj[i].mz;
    }

    auto tail_mean = [&](std::size_t from) {
        double s = 0.0;
        for (std::size_t i = from; i < n; ++i) s += mz[i];
        return s / static_cast<double>(n - from);
    };

    // Pass 1: rough asymptote from the last quarter of the record.
    double asym = tail_mean(n - std::max<std::size_t>(1, n / 4));

    struct Crossing {
        double t;
    };
    auto find_crossings = [&](double a) {
        std::vector<double> cr;
        for (std::size_t i = 1; i < n; ++i) {
            const double d0 = mz[i - 1] - a, d1 = mz[i] - a;
            if (d0 == 0.0) continue;
            if ((d0 < 0.0 && d1 >= 0.0) || (d0 > 0.0 && d1 <= 0.0)) {
                const double frac = d0 / (d0 - d1);
                cr.push_back(ts[i - 1] + frac * (ts[i] - ts[i - 1]));
            }
        }
        return cr;
    };

    auto crossings = find_crossings(asym);
    if (crossings.size() < 16)
        throw std::runtime_error(
            "simulate_cw_nutation: fewer than 8 detected oscillation periods; "
            "increase duration or reduce damping");

    // Consecutive crossings are half-periods: t_k = t_0 + k*(T/2).
    auto period_from = [&](const std::vector<double>& cr) {
        std::vector<double> idx(cr.size());
        for (std::size_t i = 0; i < cr.size(); ++i) idx[i] = static_cast<double>(i);
        return ols_line(idx, cr);
    };
    LineFit halfp = period_from(crossings);
    double period = 2.0 * halfp.slope;

    // Pass 2: asymptote from an integer number of trailing periods, then
    // re-detect crossings against the refined value.
    {
        const double span = ts[n - 1] - ts[0];
        const long k_periods = std::max(1L, static_cast<long>(std::floor(0.25 * span / period)));
        const double t_from = ts[n - 1] - static_cast<double>(k_periods) * period;
        std::size_t from = 0;
        while (from < n && ts[from] < t_from) ++from;
        if (from >= n - 2) from = n - std::max<std::size_t>(2, n / 10);
        asym = tail_mean(from);
    }
    crossings = find_crossings(asym);
    if (crossings.size() < 16)
        throw std::runtime_error(
            "simulate_cw_nutation: fewer than 8 detected oscillation periods after "
            "asymptote refinement");
    halfp = period_from(crossings);
    period = 2.0 * halfp.slope;

    NutationMetrics metrics;
    metrics.nutation_frequency = kPi / halfp.slope;

    // Extrema between consecutive crossings, parabolic refinement on the
    // deviation from the asymptote.
    std::vector<double> ext_t, ext_amp;
    std::size_t lo_idx = 0;
    for (std::size_t c = 0; c + 1 < crossings.size(); ++c) {
        while (lo_idx < n && ts[lo_idx] <= crossings[c]) ++lo_idx;
        std::size_t hi_idx = lo_idx;
        while (hi_idx < n && ts[hi_idx] < crossings[c + 1]) ++hi_idx;
        if (hi_idx <= lo_idx) continue;
        std::size_t best = lo_idx;
        double best_dev = std::abs(mz[lo_idx] - asym);
        for (std::size_t i = lo_idx; i < hi_idx; ++i) {
            const double d = std::abs(mz[i] - asym);
            if (d > best_dev) {
                best_dev = d;
                best = i;
            }
        }
        if (best == 0 || best + 1 >= n) continue;
        const double y0 = mz[best - 1] - asym, y1 = mz[best] - asym, y2 = mz[best + 1] - asym;
        const auto pk = (y1 >= 0.0) ? parabolic_peak(y0, y1, y2) : parabolic_peak(-y0, -y1, -y2);
        const double amp = std::abs(pk.value);
        if (amp <= 0.0) continue;
        ext_t.push_back(ts[best] + pk.offset * step);
        ext_amp.push_back(amp);
        lo_idx = hi_idx;
    }
    if (ext_t.size() < 8)
        throw std::runtime_error("simulate_cw_nutation: fewer than 8 usable extrema");

    // Log-linear envelope fit, dropping extrema below 1% of the first one
    // (they sit at the noise floor of the asymptote estimate).
    std::vector<double> ft, flog;
    const double floor_amp = 1e-2 * ext_amp.front();
    for (std::size_t i = 0; i < ext_t.size(); ++i) {
        if (ext_amp[i] >= floor_amp) {
            ft.push_back(ext_t[i]);
            flog.push_back(std::log(ext_amp[i]));
        }
    }
    if (ft.size() < 4)
        throw std::runtime_error("simulate_cw_nutation: too few extrema above the amplitude floor");
    const LineFit env = ols_line(ft, flog);
    metrics.damping_rate = -env.slope;
    metrics.fit_residual = env.residual_rms;
    return metrics;
}

}  // namespace spindrive
