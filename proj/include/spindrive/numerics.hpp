// Small numerical helpers shared across the simulator: deterministic RNG
// streams, stable summation, ordinary least squares, and peak refinement.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace spindrive {

inline constexpr double kPi = std::numbers::pi_v<double>;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi_v<double>;

// SplitMix64 step; used to decorrelate per-trajectory / per-sample seeds so
// results do not depend on thread scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministic Gaussian stream (xorshift-mixed counter + Box-Muller).
// Implemented by hand because std::normal_distribution is free to vary
// between standard library implementations; identical seeds must give
// identical output everywhere.
class GaussStream {
  public:
    explicit GaussStream(std::uint64_t seed) : state_(splitmix64(seed ^ 0xD1B54A32D192ED03ULL)) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // (0,1] uniforms: never exactly zero, so log() is safe.
        const double u1 = ((next_u64() >> 11) + 1) * 0x1p-53;
        const double u2 = ((next_u64() >> 11) + 1) * 0x1p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Pairwise (cascade) summation in a fixed order: associativity is pinned by
// the recursion shape, so the reduction is bitwise reproducible and carries
// O(log n) rounding growth instead of O(n).
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = v[0];
        for (std::size_t i = 1; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.data(), v.size());
}

// Ordinary least squares line fit y = intercept + slope*x with classical
// standard errors (homoscedastic residuals, n-2 degrees of freedom).
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double se_slope = 0.0;
    double se_intercept = 0.0;
    double residual_rms = 0.0;
    std::size_t n = 0;
};

inline LineFit ols_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("ols_line: need at least 2 matched points");
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        sxx += dx * dx;
        sxy += dx * (y[i] - my);
    }
    if (sxx <= 0.0)
        throw std::invalid_argument("ols_line: design is rank deficient (all x equal)");
    LineFit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        sse += r * r;
    }
    const double dof = static_cast<double>(n >= 3 ? n - 2 : 1);
    const double s2 = sse / dof;
    f.residual_rms = std::sqrt(sse / static_cast<double>(n));
    f.se_slope = std::sqrt(s2 / sxx);
    f.se_intercept = std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
    return f;
}

// Vertex of the parabola through three equally spaced samples; returns the
// offset of the vertex from x1 in units of the spacing, and the peak value.
struct ParabolicPeak {
    double offset;
    double value;
};

inline ParabolicPeak parabolic_peak(double y0, double y1, double y2) {
    const double denom = y0 - 2.0 * y1 + y2;
    if (denom == 0.0) return {0.0, y1};
    const double d = 0.5 * (y0 - y2) / denom;
    const double v = y1 - 0.25 * (y0 - y2) * d;
    return {d, v};
}

// Student-t 97.5% quantile (two-sided 95% intervals), defined in src/fit.cpp
// on top of boost.math.
double t_quantile_975(std::size_t dof);

}  // namespace spindrive
