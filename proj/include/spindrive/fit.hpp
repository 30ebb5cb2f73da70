// Decay-rate extraction from magnetization time series (log-linear least
// squares with optional joint asymptote estimation) and the quadratic
// rate-vs-drive fit that recovers the bath correlation time.
#pragma once

#include <utility>
#include <vector>

#include "spindrive/sequence.hpp"

namespace spindrive {

// How the decay asymptote is handled before taking logarithms. A series
// a + b*exp(-R t) with a != 0 makes a raw log fit biased; SubtractFitted
// first estimates (a, b, R) jointly, subtracts a, then log-fits. RawLog
// skips the subtraction (valid when the asymptote is negligible).
enum class AsymptoteMode { SubtractFitted, RawLog };

struct RateFit {
    double rate = 0.0;            // 1/s, magnitude of the log-slope
    double intercept = 0.0;       // log-magnetization units
    double residual_rms = 0.0;    // rms residual of the log-linear fit
    double ci95_halfwidth = 0.0;  // 1/s, t-distribution, n-2 dof
};

struct ParabolaFit {
    double a1 = 0.0;              // 1/s, constant term
    double b1 = 0.0;              // s, quadratic coefficient in omega1 (rad/s)
    double tau_c_estimate = 0.0;  // s, == b1 when omega1 is in rad/s
    double ci95_a1 = 0.0;
    double ci95_b1 = 0.0;
};

// Core fit on matched (t, m) vectors. Requires >= 5 points; values entering
// the logarithm must be positive (after asymptote subtraction in
// SubtractFitted mode), otherwise throws with a suggestion to switch mode.
RateFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& m,
                       AsymptoteMode mode);

RateFit fit_decay_rate(const DecaySeries& series, AsymptoteMode mode);

// Least squares of rz on {1, omega1^2}. Requires >= 3 distinct omega1
// values; throws on rank deficiency. 95% CIs per coefficient from classical
// regression theory (t-distribution, n-2 dof).
ParabolaFit fit_parabola(const std::vector<std::pair<double, double>>& omega1_rz);

}  // namespace spindrive
