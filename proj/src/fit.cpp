#include "spindrive/fit.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

#include "spindrive/numerics.hpp"

namespace spindrive {

double t_quantile_975(std::size_t dof) {
    if (dof == 0) throw std::invalid_argument("t_quantile_975: dof must be >= 1");
    boost::math::students_t_distribution<double> dist(static_cast<double>(dof));
    return boost::math::quantile(dist, 0.975);
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

// Linear LS for m = a + b*exp(-R*(t-t0)) at fixed R; returns SSE and (a, b).
struct AmplitudePair {
    double a = 0.0;
    double b = 0.0;
    double sse = std::numeric_limits<double>::infinity();
    bool ok = false;
};

AmplitudePair solve_amplitudes(const std::vector<double>& t, const std::vector<double>& m,
                               double rate) {
    const std::size_t n = t.size();
    const double t0 = t.front();
    double su = 0.0, suu = 0.0, sm = 0.0, sum = 0.0;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = std::exp(-rate * (t[i] - t0));
        su += u[i];
        suu += u[i] * u[i];
        sm += m[i];
        sum += u[i] * m[i];
    }
    const double nn = static_cast<double>(n);
    const double det = nn * suu - su * su;
    AmplitudePair out;
    if (!(std::abs(det) > 1e-300 * nn * std::max(1.0, suu))) return out;
    out.a = (suu * sm - su * sum) / det;
    out.b = (nn * sum - su * sm) / det;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = m[i] - out.a - out.b * u[i];
        sse += r * r;
    }
    out.sse = sse;
    out.ok = true;
    return out;
}

// Joint (a, b, R) estimate: coarse log-spaced scan in R followed by
// golden-section refinement of SSE(R). The problem is separable, so only R
// needs the 1-d search.
AmplitudePair fit_asymptote(const std::vector<double>& t, const std::vector<double>& m,
                            double* rate_out) {
    const double span = t.back() - t.front();
    if (!(span > 0.0)) fail("fit_decay_rate: time span must be positive");
    const double r_lo = 1e-2 / span;
    const double r_hi = 1e2 * static_cast<double>(t.size()) / span;
    const int n_scan = 120;

    double best_sse = std::numeric_limits<double>::infinity();
    int best_k = -1;
    std::vector<double> rates(n_scan);
    for (int k = 0; k < n_scan; ++k) {
        const double f = static_cast<double>(k) / (n_scan - 1);
        rates[k] = r_lo * std::pow(r_hi / r_lo, f);
        const AmplitudePair s = solve_amplitudes(t, m, rates[k]);
        if (s.ok && s.sse < best_sse) {
            best_sse = s.sse;
            best_k = k;
        }
    }
    if (best_k < 0) fail("fit_decay_rate: asymptote pre-fit failed for all trial rates");

    // Golden-section in log(R) on the bracketing interval.
    double lo = std::log(rates[std::max(0, best_k - 1)]);
    double hi = std::log(rates[std::min(n_scan - 1, best_k + 1)]);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = solve_amplitudes(t, m, std::exp(x1)).sse;
    double f2 = solve_amplitudes(t, m, std::exp(x2)).sse;
    for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = solve_amplitudes(t, m, std::exp(x1)).sse;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = solve_amplitudes(t, m, std::exp(x2)).sse;
        }
    }
    const double r_best = std::exp(0.5 * (lo + hi));
    if (rate_out) *rate_out = r_best;
    return solve_amplitudes(t, m, r_best);
}

}  // namespace

RateFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& m,
                       AsymptoteMode mode) {
    if (t.size() != m.size()) fail("fit_decay_rate: t and m sizes differ");
    if (t.size() < 5) fail("fit_decay_rate: need at least 5 points");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) fail("fit_decay_rate: times must be strictly increasing");

    double asymptote = 0.0;
    if (mode == AsymptoteMode::SubtractFitted) {
        const AmplitudePair pre = fit_asymptote(t, m, nullptr);
        asymptote = pre.a;
    }

    std::vector<double> logs(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double d = m[i] - asymptote;
        if (!(d > 0.0)) {
            if (mode == AsymptoteMode::SubtractFitted)
                fail("fit_decay_rate: nonpositive value after asymptote subtraction at point " +
                     std::to_string(i) + "; try asymptote_mode raw-log");
            fail("fit_decay_rate: nonpositive M_z value at point " + std::to_string(i) +
                 "; raw-log mode requires positive data (try subtract-fitted-asymptote)");
        }
        logs[i] = std::log(d);
    }

    const LineFit lf = ols_line(t, logs);
    RateFit out;
    out.rate = std::abs(lf.slope);
    out.intercept = lf.intercept;
    out.residual_rms = lf.residual_rms;
    out.ci95_halfwidth = (t.size() > 2) ? t_quantile_975(t.size() - 2) * lf.se_slope : 0.0;
    return out;
}

RateFit fit_decay_rate(const DecaySeries& series, AsymptoteMode mode) {
    std::vector<double> t, m;
    t.reserve(series.points.size());
    m.reserve(series.points.size());
    for (const auto& pt : series.points) {
        t.push_back(pt.t);
        m.push_back(pt.mz);
    }
    return fit_decay_rate(t, m, mode);
}

ParabolaFit fit_parabola(const std::vector<std::pair<double, double>>& omega1_rz) {
    if (omega1_rz.size() < 3) fail("fit_parabola: need at least 3 points");
    std::set<double> distinct;
    for (const auto& pr : omega1_rz) distinct.insert(pr.first);
    if (distinct.size() < 3) fail("fit_parabola: need at least 3 distinct omega1 values");

    const std::size_t n = omega1_rz.size();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = omega1_rz[i].first * omega1_rz[i].first;
        y[i] = omega1_rz[i].second;
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) fail("fit_parabola: design is rank deficient");

    ParabolaFit out;
    out.b1 = sxy / sxx;
    out.a1 = my - out.b1 * mx;
    out.tau_c_estimate = out.b1;

    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - out.a1 - out.b1 * x[i];
        sse += r * r;
    }
    const std::size_t dof = n - 2;
    const double s2 = (dof > 0) ? sse / static_cast<double>(dof) : 0.0;
    const double se_b1 = std::sqrt(s2 / sxx);
    const double se_a1 = std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
    const double tq = (dof > 0) ? t_quantile_975(dof) : 0.0;
    out.ci95_a1 = tq * se_a1;
    out.ci95_b1 = tq * se_b1;
    return out;
}

}  // namespace spindrive
