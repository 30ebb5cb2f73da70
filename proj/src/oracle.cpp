#include "spindrive/oracle.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "spindrive/numerics.hpp"

namespace spindrive {

namespace {

using cd = std::complex<double>;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

// ---------------------------------------------------------------------------
// DensityMatrix2

DensityMatrix2 DensityMatrix2::from_bloch(double bx, double by, double bz) {
    DensityMatrix2 r;
    r.m[0][0] = 0.5 * (1.0 + bz);
    r.m[1][1] = 0.5 * (1.0 - bz);
    r.m[0][1] = 0.5 * cd(bx, -by);
    r.m[1][0] = 0.5 * cd(bx, by);
    return r;
}

double DensityMatrix2::hermiticity_defect() const {
    double d = std::abs(m[0][1] - std::conj(m[1][0]));
    d = std::max(d, std::fabs(m[0][0].imag()) * 2.0);
    d = std::max(d, std::fabs(m[1][1].imag()) * 2.0);
    return d;
}

void DensityMatrix2::pauli_vector(double out[3]) const {
    out[0] = 0.5 * (m[0][1].real() + m[1][0].real());
    out[1] = 0.5 * (m[1][0].imag() - m[0][1].imag());
    out[2] = 0.5 * (m[0][0].real() - m[1][1].real());
}

double DensityMatrix2::min_eigenvalue() const {
    const double a = m[0][0].real();
    const double c = m[1][1].real();
    const cd b = 0.5 * (m[0][1] + std::conj(m[1][0]));
    const double mid = 0.5 * (a + c);
    const double rad = std::sqrt(0.25 * (a - c) * (a - c) + std::norm(b));
    return mid - rad;
}

void validate(const DensityMatrix2& rho) {
    if (rho.hermiticity_defect() > 1e-12)
        fail("DensityMatrix2: not Hermitian within 1e-12");
    if (std::abs(rho.trace() - 1.0) > 1e-12)
        fail("DensityMatrix2: trace differs from 1 by more than 1e-12");
    if (rho.min_eigenvalue() < -1e-10)
        fail("DensityMatrix2: negative eigenvalue below -1e-10");
}

// ---------------------------------------------------------------------------
// Memory-kernel Monte Carlo

FluctuationTrajectory make_fluctuation_trajectory(double kappa, double dt, int nsteps,
                                                  std::uint64_t seed) {
    if (!(kappa > 0.0) || !(dt > 0.0) || nsteps < 0)
        fail("make_fluctuation_trajectory: need kappa > 0, dt > 0, nsteps >= 0");
    FluctuationTrajectory tr;
    tr.seed = seed;
    tr.dt = dt;
    tr.samples.resize(static_cast<std::size_t>(nsteps));
    GaussStream g(seed);
    const double sigma = kappa / std::sqrt(dt);  // delta-correlation discretized
    for (auto& s : tr.samples) s = sigma * g.next();
    return tr;
}

KernelEstimate mc_memory_kernel(double kappa, const std::vector<double>& tau_grid,
                                int n_traj, double dt, std::uint64_t seed) {
    if (n_traj < 100) fail("mc_memory_kernel: n_traj must be >= 100");
    if (!(kappa > 0.0) || !(dt > 0.0)) fail("mc_memory_kernel: need kappa > 0, dt > 0");
    if (tau_grid.empty()) fail("mc_memory_kernel: empty lag grid");
    double min_pos = 0.0;
    for (double tau : tau_grid) {
        if (tau < 0.0) fail("mc_memory_kernel: lags must be >= 0");
        if (tau > 0.0 && (min_pos == 0.0 || tau < min_pos)) min_pos = tau;
    }
    if (min_pos > 0.0 && dt > min_pos / 20.0) {
        std::ostringstream os;
        os << "mc_memory_kernel: dt = " << dt << " too coarse; need dt <= min positive lag/20 = "
           << min_pos / 20.0;
        fail(os.str());
    }

    const std::size_t n_lag = tau_grid.size();
    std::vector<long> lag_steps(n_lag);
    long m_max = 0;
    for (std::size_t j = 0; j < n_lag; ++j) {
        lag_steps[j] = std::lround(tau_grid[j] / dt);
        m_max = std::max(m_max, lag_steps[j]);
    }

    // Per-trajectory phase factors, kept so that means and standard errors
    // can both be reduced pairwise in a fixed order.
    const std::size_t nt = static_cast<std::size_t>(n_traj);
    std::vector<std::vector<double>> re(n_lag, std::vector<double>(nt));
    std::vector<std::vector<double>> im(n_lag, std::vector<double>(nt));

    for (std::size_t i = 0; i < nt; ++i) {
        const std::uint64_t traj_seed = splitmix64(seed + 1000003ULL * (i + 1));
        const FluctuationTrajectory tr =
            make_fluctuation_trajectory(kappa, dt, static_cast<int>(m_max), traj_seed);
        double phi = 0.0;
        long k = 0;
        for (std::size_t j = 0; j < n_lag; ++j) {
            // lag grid is not required to be sorted; integrate incrementally
            // only when it is (the common case), else recompute.
            if (lag_steps[j] < k) {
                phi = 0.0;
                k = 0;
            }
            for (; k < lag_steps[j]; ++k) phi += tr.samples[static_cast<std::size_t>(k)] * dt;
            re[j][i] = std::cos(phi);
            im[j][i] = -std::sin(phi);
        }
    }

    KernelEstimate est;
    est.tau.resize(n_lag);
    est.kernel.resize(n_lag);
    est.se_real.resize(n_lag);
    est.se_imag.resize(n_lag);
    const double dn = static_cast<double>(nt);
    for (std::size_t j = 0; j < n_lag; ++j) {
        est.tau[j] = static_cast<double>(lag_steps[j]) * dt;
        const double mr = pairwise_sum(re[j]) / dn;
        const double mi = pairwise_sum(im[j]) / dn;
        est.kernel[j] = cd(mr, mi);
        std::vector<double> dev(nt);
        for (std::size_t i = 0; i < nt; ++i) dev[i] = (re[j][i] - mr) * (re[j][i] - mr);
        const double vr = pairwise_sum(dev) / (dn - 1.0);
        for (std::size_t i = 0; i < nt; ++i) dev[i] = (im[j][i] - mi) * (im[j][i] - mi);
        const double vi = pairwise_sum(dev) / (dn - 1.0);
        est.se_real[j] = std::sqrt(vr / dn);
        est.se_imag[j] = std::sqrt(vi / dn);
    }
    return est;
}

// ---------------------------------------------------------------------------
// Kernel transform quadrature

ComplexLorentzian gamma_quadrature(double Omega, double tau_c) {
    if (!(tau_c > 0.0)) throw std::domain_error("gamma_quadrature: tau_c must be > 0");
    using boost::math::quadrature::gauss_kronrod;
    const double upper = 40.0 * tau_c;  // kernel below 5e-18 past this point
    const auto re = [&](double tau) { return std::cos(Omega * tau) * std::exp(-tau / tau_c); };
    const auto im = [&](double tau) { return std::sin(Omega * tau) * std::exp(-tau / tau_c); };
    ComplexLorentzian g;
    g.absorptive = gauss_kronrod<double, 15>::integrate(re, 0.0, upper, 15, 1e-11);
    g.dispersive = gauss_kronrod<double, 15>::integrate(im, 0.0, upper, 15, 1e-11);
    return g;
}

// ---------------------------------------------------------------------------
// Coarse-grained double-commutator step
//
// The interaction-frame drive is H(t) = a(t) . sigma with the real Pauli
// vector a(t) = aC(t) + aR(t),
//   aC(t) = (omega1/2) (cos(dw t),  sin(dw t), 0)     resonant channel
//   aR(t) = (omega1/2) (cos(Om t), -sin(Om t), 0)     counter-rotating channel
// For rho = c0 I + r . sigma the increment decomposes into
//   first order:  dr1 = w x r,    w = 2 int a(t1) dt1
//   second order: dr2 = 4 int dt1 int dtau K(tau) a(t1) x (a(t1-tau) x r)
// with K(tau) = exp(-tau/tau_c). Using a x (b x r) = b (a.r) - (a.b) r the
// double integral reduces to a 3x3 outer-product accumulation; everything
// stays real, so the returned increment is exactly Hermitian and traceless.

namespace {

struct QuadLayout {
    long n1 = 0;        // outer-grid intervals over [t, t+delta_t]
    double h1 = 0.0;    // outer step
    double htau = 0.0;  // lag step
    double tau_max = 0.0;
};

QuadLayout plan_quadrature(const SpinSystemParams& p, double delta_t, int quad_points,
                           bool enforce_window) {
    if (!(delta_t > 0.0)) fail("coarse-grained quadrature: delta_t must be > 0");
    const double ratio_tc = p.tau_c / delta_t;
    const double ratio_w1 = p.omega1 * delta_t;
    if (enforce_window && (ratio_tc >= 0.05 || ratio_w1 >= 0.05)) {
        std::ostringstream os;
        os << "coarse-graining window empty: tau_c/delta_t = " << ratio_tc
           << ", omega1*delta_t = " << ratio_w1 << " (both must be < 0.05)";
        fail(os.str());
    }
    if (quad_points < 64) fail("coarse-grained quadrature: quad_points must be >= 64 per dimension");
    const double Om = std::fabs(p.Omega());
    QuadLayout q;
    q.n1 = quad_points;
    q.h1 = delta_t / static_cast<double>(q.n1);
    if (Om > 0.0) {
        const double pts_per_period = kTwoPi / (Om * q.h1);
        if (pts_per_period < 20.0) {
            std::ostringstream os;
            os << "coarse-grained quadrature: quad_points = " << quad_points << " gives only "
               << pts_per_period << " points per counter-rotating period; need >= 20";
            fail(os.str());
        }
    }
    q.tau_max = std::min(40.0 * p.tau_c, delta_t);
    double htau = p.tau_c / 24.0;
    if (Om > 0.0) htau = std::min(htau, kTwoPi / (32.0 * Om));
    htau = std::min(htau, q.tau_max / 64.0);  // at least 64 lag nodes
    q.htau = htau;
    return q;
}

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

// Accumulators for the second-order generator: T = int int K a2 a1^T over
// the in-plane components, s = int int K (a1 . a2). Split by channel pair so
// the secular cross-term diagnostic can reuse the same sweep.
struct PairAccum {
    double txx = 0.0, txy = 0.0, tyx = 0.0, tyy = 0.0, dot = 0.0;
    void add(double w, double a1x, double a1y, double a2x, double a2y) {
        txx += w * a2x * a1x;
        txy += w * a2x * a1y;
        tyx += w * a2y * a1x;
        tyy += w * a2y * a1y;
        dot += w * (a1x * a2x + a1y * a2y);
    }
    void scaled_add(const PairAccum& o, double w) {
        txx += w * o.txx;
        txy += w * o.txy;
        tyx += w * o.tyx;
        tyy += w * o.tyy;
        dot += w * o.dot;
    }
};

struct SweepResult {
    PairAccum self;   // CC + RR channel pairs
    PairAccum cross;  // CR + RC channel pairs
    Vec3 wfirst;      // 2 int a(t1) dt1
};

// One full trapezoid sweep of the double integral. Channel pairs are kept
// separate; callers combine them. K and the channel phases advance by
// incremental rotation (one complex multiply per lag step).
SweepResult sweep_double_integral(const SpinSystemParams& p, double t0, const QuadLayout& q) {
    const double w1h = 0.5 * p.omega1;  // channel amplitude
    const double dw = p.delta_omega();
    const double Om = p.Omega();
    const double kdec = std::exp(-q.htau / p.tau_c);
    const double cOm = std::cos(Om * q.htau), sOm = std::sin(Om * q.htau);
    const double cdw = std::cos(dw * q.htau), sdw = std::sin(dw * q.htau);

    SweepResult out;
    Vec3 wf;  // trapezoid accumulation of a(t1)

    for (long i = 0; i <= q.n1; ++i) {
        const double trel = static_cast<double>(i) * q.h1;
        const double t1 = t0 + trel;
        const double row_w = (i == 0 || i == q.n1) ? 0.5 * q.h1 : q.h1;

        // Channel vectors at the outer time.
        const double c1C = std::cos(dw * t1), s1C = std::sin(dw * t1);
        const double c1R = std::cos(Om * t1), s1R = std::sin(Om * t1);
        const double a1Cx = w1h * c1C, a1Cy = w1h * s1C;
        const double a1Rx = w1h * c1R, a1Ry = -w1h * s1R;

        wf.x += row_w * (a1Cx + a1Rx);
        wf.y += row_w * (a1Cy + a1Ry);

        const double tau_hi = std::min(q.tau_max, trel);
        if (tau_hi <= 0.0) continue;
        const long full = static_cast<long>(std::floor(tau_hi / q.htau));
        const double frac = tau_hi - static_cast<double>(full) * q.htau;

        // Inner state at tau = 0 (t2 == t1).
        double kck = 1.0;
        double c2C = c1C, s2C = s1C, c2R = c1R, s2R = s1R;

        PairAccum self_row, cross_row;
        auto add_point = [&](double w, double a2Cx, double a2Cy, double a2Rx, double a2Ry) {
            self_row.add(w, a1Cx, a1Cy, a2Cx, a2Cy);
            self_row.add(w, a1Rx, a1Ry, a2Rx, a2Ry);
            cross_row.add(w, a1Cx, a1Cy, a2Rx, a2Ry);
            cross_row.add(w, a1Rx, a1Ry, a2Cx, a2Cy);
        };

        for (long j = 0; j <= full; ++j) {
            double w = (j == 0 || j == full) ? 0.5 * q.htau : q.htau;
            if (full == 0) w = 0.0;  // no full cell; fractional piece below
            if (w != 0.0)
                add_point(w * kck, w1h * c2C, w1h * s2C, w1h * c2R, -w1h * s2R);
            if (j < full) {
                // t2 -> t2 - htau: rotate phases backward, decay the kernel.
                const double nc2C = c2C * cdw + s2C * sdw;
                s2C = s2C * cdw - c2C * sdw;
                c2C = nc2C;
                const double nc2R = c2R * cOm + s2R * sOm;
                s2R = s2R * cOm - c2R * sOm;
                c2R = nc2R;
                kck *= kdec;
            }
        }
        if (frac > 0.0) {
            // Exact fractional last cell [full*htau, tau_hi].
            const double t2 = t1 - tau_hi;
            const double kend = std::exp(-tau_hi / p.tau_c);
            const double ce = std::cos(dw * t2), se = std::sin(dw * t2);
            const double cr = std::cos(Om * t2), sr = std::sin(Om * t2);
            const double wfr = 0.5 * frac;
            add_point(wfr * kck, w1h * c2C, w1h * s2C, w1h * c2R, -w1h * s2R);
            add_point(wfr * kend, w1h * ce, w1h * se, w1h * cr, -w1h * sr);
        }

        out.self.scaled_add(self_row, row_w);
        out.cross.scaled_add(cross_row, row_w);
    }

    out.wfirst.x = 2.0 * wf.x;
    out.wfirst.y = 2.0 * wf.y;
    out.wfirst.z = 0.0;
    return out;
}

// Largest |entry| of the 3x3 generator 4 (T - s I) built from a PairAccum.
double max_generator_entry(const PairAccum& a) {
    double m = 0.0;
    m = std::max(m, std::fabs(a.txx - a.dot));
    m = std::max(m, std::fabs(a.txy));
    m = std::max(m, std::fabs(a.tyx));
    m = std::max(m, std::fabs(a.tyy - a.dot));
    m = std::max(m, std::fabs(a.dot));  // zz entry
    return 4.0 * m;
}

}  // namespace

DensityMatrix2 coarse_grained_step(const DensityMatrix2& rho, const SpinSystemParams& p,
                                   double t, double delta_t, int quad_points,
                                   bool enforce_window) {
    validate(p);
    validate(rho);
    DensityMatrix2 inc;
    if (p.omega1 == 0.0) return inc;  // no drive, no increment

    const QuadLayout q = plan_quadrature(p, delta_t, quad_points, enforce_window);
    const SweepResult sw = sweep_double_integral(p, t, q);

    double r[3];
    rho.pauli_vector(r);

    // First order: dr1 = w x r.
    const Vec3 w = sw.wfirst;
    double dr[3];
    dr[0] = w.y * r[2];
    dr[1] = -w.x * r[2];
    dr[2] = w.x * r[1] - w.y * r[0];

    // Second order: dr2 = 4 (T r - s r) with T, s summed over all channels.
    PairAccum a = sw.self;
    a.scaled_add(sw.cross, 1.0);
    dr[0] += 4.0 * (a.txx * r[0] + a.txy * r[1] - a.dot * r[0]);
    dr[1] += 4.0 * (a.tyx * r[0] + a.tyy * r[1] - a.dot * r[1]);
    dr[2] += 4.0 * (-a.dot * r[2]);

    inc.m[0][0] = cd(dr[2], 0.0);
    inc.m[1][1] = cd(-dr[2], 0.0);
    inc.m[0][1] = cd(dr[0], -dr[1]);
    inc.m[1][0] = cd(dr[0], dr[1]);
    return inc;
}

double secular_crossterm_magnitude(const SpinSystemParams& p, double delta_t) {
    validate(p);
    if (p.omega1 == 0.0) fail("secular_crossterm_magnitude: omega1 must be > 0");
    const double Om = std::fabs(p.Omega());
    if (Om == 0.0) fail("secular_crossterm_magnitude: Omega must be nonzero");
    // Internal outer grid: 32 points per counter-rotating period, >= 64.
    const double periods = delta_t * Om / kTwoPi;
    const long n1 = std::max<long>(64, static_cast<long>(std::ceil(32.0 * periods)));
    const QuadLayout q = plan_quadrature(p, delta_t, static_cast<int>(n1), true);
    const SweepResult sw = sweep_double_integral(p, 0.0, q);
    const double denom = max_generator_entry(sw.self);
    if (denom == 0.0) fail("secular_crossterm_magnitude: secular self-term vanished");
    return max_generator_entry(sw.cross) / denom;
}

// ---------------------------------------------------------------------------
// Operator algebra check

namespace {

struct M2 {
    cd a[2][2];
};

M2 mul(const M2& x, const M2& y) {
    M2 r;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r.a[i][j] = x.a[i][0] * y.a[0][j] + x.a[i][1] * y.a[1][j];
    return r;
}

M2 commutator(const M2& x, const M2& y) {
    const M2 xy = mul(x, y), yx = mul(y, x);
    M2 r;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r.a[i][j] = xy.a[i][j] - yx.a[i][j];
    return r;
}

double max_abs_diff(const M2& x, const M2& y) {
    double m = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m = std::max(m, std::abs(x.a[i][j] - y.a[i][j]));
    return m;
}

}  // namespace

double commutator_identity_check(double delta_omega, double t) {
    const double phi = delta_omega * t;
    const cd e(std::cos(phi / 2.0), -std::sin(phi / 2.0));  // exp(-i phi/2)
    const M2 U{{{e, 0.0}, {0.0, std::conj(e)}}};
    const M2 Ud{{{std::conj(e), 0.0}, {0.0, e}}};
    const M2 Ix{{{0.0, 0.5}, {0.5, 0.0}}};
    const M2 Iy{{{0.0, cd(0.0, -0.5)}, {cd(0.0, 0.5), 0.0}}};
    const M2 Iz{{{0.5, 0.0}, {0.0, -0.5}}};
    const M2 F[3] = {mul(mul(U, Ix), Ud), mul(mul(U, Iy), Ud), mul(mul(U, Iz), Ud)};

    double dev = 0.0;
    for (int k = 0; k < 3; ++k) {
        for (int mth = 0; mth < 3; ++mth) {
            M2 lhs = commutator(F[k], F[mth]);
            M2 rhs{{{0.0, 0.0}, {0.0, 0.0}}};
            for (int pth = 0; pth < 3; ++pth) {
                int sign = 0;
                if ((k == 0 && mth == 1 && pth == 2) || (k == 1 && mth == 2 && pth == 0) ||
                    (k == 2 && mth == 0 && pth == 1))
                    sign = 1;
                else if ((k == 0 && mth == 2 && pth == 1) || (k == 2 && mth == 1 && pth == 0) ||
                         (k == 1 && mth == 0 && pth == 2))
                    sign = -1;
                if (sign != 0) {
                    const cd f(0.0, static_cast<double>(sign));
                    for (int i = 0; i < 2; ++i)
                        for (int j = 0; j < 2; ++j) rhs.a[i][j] += f * F[pth].a[i][j];
                }
            }
            dev = std::max(dev, max_abs_diff(lhs, rhs));
        }
    }
    return dev;
}

// ---------------------------------------------------------------------------
// Hilbert transform (Kramers-Kronig cross-check)

double hilbert_dispersive(double Omega, double tau_c, int n_points, double span_x) {
    if (!(tau_c > 0.0)) throw std::domain_error("hilbert_dispersive: tau_c must be > 0");
    if (n_points < 10001) fail("hilbert_dispersive: need at least 10001 grid points");
    if (n_points % 2 == 0) ++n_points;  // Simpson needs an even interval count
    const double x0 = Omega * tau_c;
    if (std::fabs(x0) >= 0.5 * span_x)
        fail("hilbert_dispersive: evaluation point too close to the grid edge");

    const auto A = [](double x) { return 1.0 / (1.0 + x * x); };  // absorptive shape
    const double L = span_x;
    const double h = 2.0 * L / static_cast<double>(n_points - 1);
    const double Ax0 = A(x0);

    // Regularized integrand g(x) = (A(x) - A(x0)) / (x - x0); the removable
    // singularity is filled with a central-difference derivative estimate.
    double sum = 0.0;
    for (int i = 0; i < n_points; ++i) {
        const double x = -L + h * static_cast<double>(i);
        double g;
        const double d = x - x0;
        if (std::fabs(d) < 1e-9) {
            const double delta = 1e-6;
            g = (A(x0 + delta) - A(x0 - delta)) / (2.0 * delta);
        } else {
            g = (A(x) - Ax0) / d;
        }
        double w;
        if (i == 0 || i == n_points - 1)
            w = 1.0;
        else if (i % 2 == 1)
            w = 4.0;
        else
            w = 2.0;
        sum += w * g;
    }
    const double pv = sum * h / 3.0 + Ax0 * std::log(std::fabs((L - x0) / (L + x0)));
    return -(tau_c / std::numbers::pi_v<double>)*pv;
}

}  // namespace spindrive
