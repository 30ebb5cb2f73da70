// Fixed-step integration of the damped/shifted Bloch equations for
// piecewise-constant drive programs, and continuous-wave nutation metric
// extraction (frequency, damping, fit residual).
#pragma once

#include <array>
#include <vector>

#include "spindrive/model.hpp"

namespace spindrive {

// Co-rotating-frame magnetization at elapsed time t.
struct MagnetizationState {
    double mx = 0.0;
    double my = 0.0;
    double mz = 0.0;
    double t = 0.0;
};

// One piecewise-constant drive interval. amplitude is the signed drive
// strength (sign encodes the +x/-x pulse phase); offset is the resonance
// offset during the segment.
struct DriveSegment {
    double amplitude = 0.0;  // rad/s, signed
    double duration = 0.0;   // s, >= 0
    double offset = 0.0;     // rad/s
};

struct DriveProgram {
    std::vector<DriveSegment> segments;
    double total_duration = 0.0;  // always the exact sum of segment durations

    static DriveProgram from_segments(std::vector<DriveSegment> segs);
};

struct NutationMetrics {
    double nutation_frequency = 0.0;  // rad/s
    double damping_rate = 0.0;        // 1/s
    double fit_residual = 0.0;        // rms residual of the log-envelope fit
};

// Right-hand side of the modified Bloch equations for one segment:
//   dMz/dt =  w1*My - (Mz - M0)/T1 - eta_z*Mz
//   dMx/dt =  (dw - w_bs)*My - Mx/T2 - eta_x*Mx
//   dMy/dt = -(dw - w_bs - d_shift)*Mx - w1*Mz - My/T2 - eta_y*My
// where w1 is the signed segment amplitude and the coefficients c must be
// computed for |amplitude| and the segment's offset. Note eta_z damps Mz
// toward zero while T1 restores toward M0, so the driven steady state is not
// M0 even for weak drive; this is intentional.
std::array<double, 3> bloch_derivative(const MagnetizationState& s, const SpinSystemParams& p,
                                       const DriveCoefficients& c, double segment_amplitude,
                                       double segment_offset);

// Classical fixed-step 4th-order Runge-Kutta over the program. Requires
// step <= min positive segment duration / 10 and step * max|amplitude| <=
// 0.05 rad. Segment boundaries land exactly on the grid (the last substep of
// each segment is shortened). The trajectory is sampled at the start, at all
// segment boundaries, and every interior_stride-th interior substep
// (0 = boundaries only). Coefficients are recomputed per segment from
// |amplitude| and the segment offset; zero-amplitude segments carry no
// second-order drive terms at all.
std::vector<MagnetizationState> integrate(const MagnetizationState& s0,
                                          const DriveProgram& program,
                                          const SpinSystemParams& p, double step,
                                          int interior_stride = 0);

// Runs a single constant on-resonance segment from (0, 0, M0) and extracts
// nutation frequency (zero crossings of Mz about its asymptote) and damping
// (log-linear regression on oscillation extrema). Requires delta_omega == 0
// and omega1 > 1/T1, 1/T2; fails if fewer than 8 full oscillation periods
// are detected.
NutationMetrics simulate_cw_nutation(const SpinSystemParams& p, double duration, double step);

}  // namespace spindrive
