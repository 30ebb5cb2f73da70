// Independent brute-force validations of the closed-form theory: Monte-Carlo
// emergence of the bath memory kernel, direct quadrature of the complex
// Lorentzian, the coarse-grained double-commutator propagator step, spin
// operator algebra checks, the secular cross-term estimate, and a numerical
// Hilbert transform for the Kramers-Kronig consistency test. Everything here
// is deliberately independent of the closed forms it cross-checks.
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "spindrive/model.hpp"

namespace spindrive {

// 2x2 reduced density matrix of the spin-1/2. States must be Hermitian and
// unit-trace to 1e-12 with eigenvalues >= -1e-10 (see validate()).
struct DensityMatrix2 {
    std::complex<double> m[2][2] = {{0.0, 0.0}, {0.0, 0.0}};

    // rho = (1/2)(I + b . sigma) for a Bloch vector b.
    static DensityMatrix2 from_bloch(double bx, double by, double bz);

    std::complex<double> trace() const { return m[0][0] + m[1][1]; }
    double hermiticity_defect() const;
    double min_eigenvalue() const;  // of the Hermitian part
    // Pauli components (coefficients of sigma_k in the Hermitian part).
    void pauli_vector(double out[3]) const;
};

void validate(const DensityMatrix2& rho);

// One realization of the discretized delta-correlated lattice fluctuation:
// i.i.d. Gaussian samples with variance kappa^2/dt per step of width dt.
struct FluctuationTrajectory {
    std::uint64_t seed = 0;
    double dt = 0.0;
    std::vector<double> samples;
};

FluctuationTrajectory make_fluctuation_trajectory(double kappa, double dt, int nsteps,
                                                  std::uint64_t seed);

// Ensemble-averaged phase factors exp(-i Phi(tau)) on a lag grid, with
// per-lag standard errors of the real and imaginary parts.
struct KernelEstimate {
    std::vector<double> tau;                     // realized lags (multiples of dt)
    std::vector<std::complex<double>> kernel;    // ensemble means
    std::vector<double> se_real;
    std::vector<double> se_imag;
};

// Monte-Carlo estimate of the memory kernel; the expected modulus decay is
// exp(-kappa^2 tau / 2). Requires dt <= min positive lag / 20 and
// n_traj >= 100. Trajectories are seeded from (seed, index) and reduced by
// pairwise summation in a fixed order, so results are reproducible.
KernelEstimate mc_memory_kernel(double kappa, const std::vector<double>& tau_grid,
                                int n_traj, double dt, std::uint64_t seed);

// Adaptive quadrature of the one-sided kernel transform
// integral_0^inf exp(i Omega tau) exp(-tau/tau_c) dtau, truncated at 40
// tau_c, relative tolerance 1e-10. Cross-checks model::compute_gamma.
ComplexLorentzian gamma_quadrature(double Omega, double tau_c);

// One coarse-grained propagation step: the first-order commutator plus the
// kernel-weighted double-commutator double integral of the full interaction
// Hamiltonian (co-rotating plus counter-rotating, no secular filtering),
// evaluated by the trapezoid rule on uniform grids. quad_points sets the
// outer-time grid (>= 64, and at least 20 points per counter-rotating
// period); the lag grid is refined internally to resolve both the kernel
// and the oscillation. Requires tau_c/delta_t < 0.05 and
// omega1*delta_t < 0.05 unless enforce_window is false (used to probe the
// shrinking-window unitary limit). Returns the increment delta-rho, which is
// exactly traceless and Hermitian by construction.
DensityMatrix2 coarse_grained_step(const DensityMatrix2& rho, const SpinSystemParams& p,
                                   double t, double delta_t, int quad_points,
                                   bool enforce_window = true);

// Verifies the su(2) closure [F_k, F_m] = i eps_{kmp} F_p for the
// interaction-frame spin operators rotated by angle delta_omega * t about z.
// Returns the maximum elementwise deviation over all index pairs.
double commutator_identity_check(double delta_omega, double t);

// Ratio of the largest cross-channel (co-rotating x counter-rotating)
// second-order generator entry to the largest same-channel entry, using the
// same double quadrature as coarse_grained_step. Small values justify
// dropping the cross terms.
double secular_crossterm_magnitude(const SpinSystemParams& p, double delta_t);

// Numerical principal-value Hilbert transform mapping the absorptive
// Lorentzian component onto the dispersive one:
//   D(Omega) = -(1/pi) P integral A(Omega') / (Omega' - Omega) dOmega'.
// Composite Simpson on a uniform grid spanning |Omega' tau_c| <= span_x with
// the singularity regularized and the finite-window tail added analytically.
double hilbert_dispersive(double Omega, double tau_c, int n_points = 22001,
                          double span_x = 220.0);

}  // namespace spindrive
