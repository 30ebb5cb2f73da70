#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "spindrive/model.hpp"
#include "spindrive/numerics.hpp"
#include "spindrive/oracle.hpp"

using namespace spindrive;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

bool rel_close(double got, double want, double tol) {
    return std::fabs(got - want) <= tol * std::fabs(want);
}

template <class F>
std::string thrown_message(F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

// Per-axis damping/shift rates read off one coarse-grained step, normalized
// by the input Pauli component.
struct StepRates {
    double eta_x, eta_y, eta_z, omega_bs;
};

StepRates measure_step_rates(const SpinSystemParams& p, double delta_t, int quad_points) {
    StepRates r{};
    double r0[3], dr[3];

    const DensityMatrix2 rz = DensityMatrix2::from_bloch(0.0, 0.0, 1.0);
    rz.pauli_vector(r0);
    coarse_grained_step(rz, p, 0.0, delta_t, quad_points).pauli_vector(dr);
    r.eta_z = -dr[2] / (r0[2] * delta_t);

    const DensityMatrix2 rx = DensityMatrix2::from_bloch(1.0, 0.0, 0.0);
    rx.pauli_vector(r0);
    coarse_grained_step(rx, p, 0.0, delta_t, quad_points).pauli_vector(dr);
    r.eta_x = -dr[0] / (r0[0] * delta_t);
    r.omega_bs = dr[1] / (r0[0] * delta_t);

    const DensityMatrix2 ry = DensityMatrix2::from_bloch(0.0, 1.0, 0.0);
    ry.pauli_vector(r0);
    coarse_grained_step(ry, p, 0.0, delta_t, quad_points).pauli_vector(dr);
    r.eta_y = -dr[1] / (r0[1] * delta_t);
    return r;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("quadrature reproduces the closed-form bath transform") {
    const double tau_c = 1e-9;
    std::vector<double> xs = {0.0};
    for (int i = 0; i < 49; ++i)
        xs.push_back(0.01 * std::pow(100.0 / 0.01, i / 48.0));
    double worst = 0.0;
    for (double x : xs) {
        const double Om = x / tau_c;
        const ComplexLorentzian closed = compute_gamma(Om, tau_c);
        const ComplexLorentzian quad = gamma_quadrature(Om, tau_c);
        const double dev = std::hypot(quad.absorptive - closed.absorptive,
                                      quad.dispersive - closed.dispersive) /
                           std::hypot(closed.absorptive, closed.dispersive);
        worst = std::max(worst, dev);
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("quadrature keeps the Lorentzian parity") {
    const double tau_c = 1e-9, Om = 3.7e9;
    const ComplexLorentzian plus = gamma_quadrature(Om, tau_c);
    const ComplexLorentzian minus = gamma_quadrature(-Om, tau_c);
    CHECK(rel_close(minus.absorptive, plus.absorptive, 1e-9));
    CHECK(rel_close(minus.dispersive, -plus.dispersive, 1e-9));
}

TEST_CASE("quadrature dispersive component approaches the inverse frequency") {
    const double tau_c = 1e-9, Om = 100.0 / tau_c;
    CHECK(rel_close(gamma_quadrature(Om, tau_c).dispersive, 1.0 / Om, 1e-4));
}

TEST_CASE("quadrature rejects non-positive correlation time") {
    CHECK_THROWS_AS(gamma_quadrature(1e9, 0.0), std::domain_error);
    CHECK(thrown_message([] { gamma_quadrature(1e9, -1.0); })
              .find("gamma_quadrature: tau_c must be > 0") != std::string::npos);
}

TEST_CASE("density matrix construction from a Bloch vector") {
    const DensityMatrix2 rho = DensityMatrix2::from_bloch(0.3, -0.4, 0.5);
    CHECK(rho.trace() == std::complex<double>(1.0, 0.0));
    CHECK(rho.hermiticity_defect() == 0.0);
    CHECK(rho.m[0][0].real() == 0.5 * 1.5);
    CHECK(rho.m[1][1].real() == 0.5 * 0.5);
    CHECK(rho.m[0][1] == std::complex<double>(0.5 * 0.3, 0.5 * 0.4));
    CHECK(rho.m[1][0] == std::complex<double>(0.5 * 0.3, -0.5 * 0.4));
    double r[3];
    rho.pauli_vector(r);
    CHECK(r[0] == 0.5 * 0.3);
    CHECK(r[1] == 0.5 * -0.4);
    CHECK(r[2] == 0.5 * 0.5);
    CHECK_NOTHROW(validate(rho));
    // |b| = 1 is a pure state: smallest eigenvalue 0.
    CHECK(std::fabs(DensityMatrix2::from_bloch(0.0, 0.0, 1.0).min_eigenvalue()) < 1e-15);
    // |b| > 1 is unphysical.
    CHECK_THROWS_AS(validate(DensityMatrix2::from_bloch(0.0, 0.0, 1.2)), std::exception);
}

TEST_CASE("fluctuation trajectories are reproducible white noise") {
    const double kappa = 2.0, dt = 0.01;
    const FluctuationTrajectory a = make_fluctuation_trajectory(kappa, dt, 20000, 11);
    const FluctuationTrajectory b = make_fluctuation_trajectory(kappa, dt, 20000, 11);
    REQUIRE(a.samples.size() == 20000);
    CHECK(a.samples == b.samples);
    const FluctuationTrajectory c = make_fluctuation_trajectory(kappa, dt, 20000, 12);
    CHECK(a.samples != c.samples);

    double mean = 0.0;
    for (double v : a.samples) mean += v;
    mean /= 20000.0;
    double var = 0.0;
    for (double v : a.samples) var += (v - mean) * (v - mean);
    var /= 19999.0;
    // Discretized delta-correlated noise: variance kappa^2/dt per sample.
    CHECK(rel_close(var, kappa * kappa / dt, 0.05));
    CHECK(std::fabs(mean) < 0.75);  // 5 standard errors
    CHECK_THROWS_AS(make_fluctuation_trajectory(0.0, dt, 10, 1), std::exception);
}

TEST_CASE("memory kernel starts at one and decays to 1/e at the correlation time") {
    const double tau_c = 1e-3, kappa = std::sqrt(2.0 / tau_c);
    const KernelEstimate k =
        mc_memory_kernel(kappa, {0.0, tau_c}, 10000, tau_c / 128.0, 7);
    REQUIRE(k.tau.size() == 2);
    CHECK(k.tau[0] == 0.0);
    CHECK(k.kernel[0] == std::complex<double>(1.0, 0.0));
    CHECK(k.se_real[0] == 0.0);
    const double mag = std::abs(k.kernel[1]);
    const double se = std::hypot(k.se_real[1], k.se_imag[1]);
    CHECK(std::fabs(mag - std::exp(-1.0)) < 3.0 * se);
    CHECK(rel_close(mag, 0.37203, 1e-3));
}

TEST_CASE("memory kernel is bitwise reproducible per seed") {
    const double tau_c = 1e-3, kappa = std::sqrt(2.0 / tau_c);
    const std::vector<double> grid = {0.0, 0.5 * tau_c, tau_c};
    const KernelEstimate a = mc_memory_kernel(kappa, grid, 400, tau_c / 128.0, 3);
    const KernelEstimate b = mc_memory_kernel(kappa, grid, 400, tau_c / 128.0, 3);
    CHECK(a.kernel == b.kernel);
    CHECK(a.se_real == b.se_real);
    const KernelEstimate c = mc_memory_kernel(kappa, grid, 400, tau_c / 128.0, 4);
    CHECK(a.kernel != c.kernel);
}

TEST_CASE("quadrupling the fluctuation strength quarters the kernel decay time") {
    // Fitted decay times from independent ensembles must scale as 1/kappa^2.
    auto fitted_tau = [](double kappa, std::uint64_t seed) {
        const double tc = 2.0 / (kappa * kappa);
        std::vector<double> grid;
        for (int j = 0; j < 20; ++j) grid.push_back(j * 3.0 * tc / 19.0);
        const KernelEstimate k = mc_memory_kernel(kappa, grid, 20000, tc / 128.0, seed);
        std::vector<double> xs, ys;
        for (std::size_t j = 0; j < k.tau.size(); ++j) {
            const double mag = std::abs(k.kernel[j]);
            if (mag > 0.2) {
                xs.push_back(k.tau[j]);
                ys.push_back(std::log(mag));
            }
        }
        return -1.0 / ols_line(xs, ys).slope;
    };
    const double kappa = std::sqrt(2.0 / 1e-3);
    const double ratio = fitted_tau(kappa, 42) / fitted_tau(2.0 * kappa, 137);
    CHECK(rel_close(ratio, 4.0, 0.10));
}

TEST_CASE("memory kernel input validation") {
    CHECK(thrown_message([] { mc_memory_kernel(10.0, {0.0, 1.0}, 99, 0.01, 0); })
              .find("mc_memory_kernel: n_traj must be >= 100") != std::string::npos);
    // dt must resolve the shortest positive lag 20x over.
    CHECK(thrown_message([] { mc_memory_kernel(10.0, {0.0, 1.0}, 200, 0.1, 0); })
              .find("too coarse") != std::string::npos);
}

TEST_CASE("coarse-grained step reproduces the damping and shift rates") {
    // One counter-rotating product Omega*tau_c = 1; rates extracted from the
    // per-axis first-order response of a single step.
    const double tau_c = 1e-9, Om = 1.0 / tau_c;
    const double delta_t = 64.0 * kTwoPi / Om;
    const double w1 = 0.01 / delta_t;
    const SpinSystemParams p = make_params_tau(0.5 * Om, w1, 0.5 * Om, tau_c, kInf, kInf);
    const DriveCoefficients c = compute_coefficients(p);
    const StepRates r = measure_step_rates(p, delta_t, 2048);
    CHECK(rel_close(r.eta_z, c.eta_z, 0.02));
    CHECK(rel_close(r.eta_x, c.eta_x, 0.02));
    CHECK(rel_close(r.eta_y, c.eta_y, 0.02));
    CHECK(rel_close(r.omega_bs, c.omega_bs, 0.02));
}

TEST_CASE("coarse-grained increment is exactly traceless and Hermitian") {
    const double tau_c = 1e-9, Om = 1.0 / tau_c;
    const double delta_t = 64.0 * kTwoPi / Om;
    const SpinSystemParams p =
        make_params_tau(0.5 * Om, 0.01 / delta_t, 0.5 * Om, tau_c, kInf, kInf);
    const DensityMatrix2 d = coarse_grained_step(
        DensityMatrix2::from_bloch(0.3, -0.4, 0.5), p, 0.0, delta_t, 2048);
    CHECK(d.trace() == std::complex<double>(0.0, 0.0));
    CHECK(d.hermiticity_defect() == 0.0);
}

TEST_CASE("zero drive produces a zero increment") {
    const double tau_c = 1e-10, Om = 1e9;
    const double delta_t = 2.0 * kTwoPi / Om;
    const SpinSystemParams p = make_params_tau(0.5 * Om, 0.0, 0.5 * Om, tau_c, kInf, kInf);
    const DensityMatrix2 d = coarse_grained_step(
        DensityMatrix2::from_bloch(0.0, 0.0, 1.0), p, 0.0, delta_t, 64);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(std::abs(d.m[i][j]) == 0.0);
}

TEST_CASE("damping disappears linearly as the window shrinks below the bath memory") {
    // With tau_c >> delta_t the kernel is unresolved and the step is
    // effectively unitary: the apparent rate falls linearly with delta_t.
    const SpinSystemParams p = make_params_tau(1e3, 10.0, 1e3, 1e-3, kInf, kInf);
    const DensityMatrix2 rz = DensityMatrix2::from_bloch(0.0, 0.0, 1.0);
    double r0[3], dr[3];
    rz.pauli_vector(r0);
    auto rate_at = [&](double dt) {
        coarse_grained_step(rz, p, 0.0, dt, 64, false).pauli_vector(dr);
        return -dr[2] / (r0[2] * dt);
    };
    const double r1 = rate_at(1e-6), r2 = rate_at(2e-6), r4 = rate_at(4e-6);
    CHECK(rel_close(r2 / r1, 2.0, 0.05));
    CHECK(rel_close(r4 / r2, 2.0, 0.05));
}

TEST_CASE("coarse-grained step enforces its validity window") {
    const SpinSystemParams slow = make_params_tau(1e3, 10.0, 1e3, 1e-3, kInf, kInf);
    const DensityMatrix2 rz = DensityMatrix2::from_bloch(0.0, 0.0, 1.0);
    CHECK(thrown_message([&] { coarse_grained_step(rz, slow, 0.0, 1e-6, 64); })
              .find("coarse-graining window empty") != std::string::npos);

    const double tau_c = 1e-9, Om = 1e9;
    const SpinSystemParams p =
        make_params_tau(0.5 * Om, 1e3, 0.5 * Om, tau_c, kInf, kInf);
    CHECK(thrown_message([&] {
              coarse_grained_step(rz, p, 0.0, 64.0 * kTwoPi / Om, 32);
          }).find("quad_points must be >= 64") != std::string::npos);
    CHECK(thrown_message([&] {
              coarse_grained_step(rz, p, 0.0, 640.0 * kTwoPi / Om, 64);
          }).find("per counter-rotating period; need >= 20") != std::string::npos);
}

TEST_CASE("interaction-frame spin operators close under commutation") {
    CHECK(commutator_identity_check(0.0, 0.0) <= 1e-14);
    CHECK(commutator_identity_check(kTwoPi * 100.0, 0.37) <= 1e-13);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i)
        worst = std::max(worst, commutator_identity_check(kTwoPi * 100.0, i * 0.01));
    CHECK(worst <= 1e-13);
}

TEST_CASE("cross-channel second-order terms are negligible over long windows") {
    const double Om = kTwoPi * 1e9;
    const SpinSystemParams p =
        make_params_tau(0.5 * Om, kTwoPi * 5e3, 0.5 * Om, 1e-12, kInf, kInf);
    const double m = secular_crossterm_magnitude(p, 1e-6);
    CHECK(m < 1e-3);
    CHECK(rel_close(m, 1.562524e-5, 1e-3));
}

TEST_CASE("cross-channel magnitude falls as the window grows") {
    const double Om = kTwoPi * 1e9, period = kTwoPi / Om;
    const SpinSystemParams p =
        make_params_tau(0.5 * Om, kTwoPi * 5e3, 0.5 * Om, 1e-12, kInf, kInf);
    double prev = kInf;
    for (double halves : {100.5, 215.5, 464.5, 1000.5}) {
        const double m = secular_crossterm_magnitude(p, halves * period);
        CHECK(m < prev);
        prev = m;
    }
    CHECK(prev < 2e-4);
}

TEST_CASE("Hilbert transform maps the absorptive component onto the dispersive") {
    const double tau_c = 1e-9;
    double worst = 0.0;
    for (int i = 0; i < 13; ++i) {
        const double x = 0.05 * std::pow(50.0 / 0.05, i / 12.0);
        for (double sgn : {1.0, -1.0}) {
            const double Om = sgn * x / tau_c;
            const double want = compute_gamma(Om, tau_c).dispersive;
            const double got = hilbert_dispersive(Om, tau_c);
            worst = std::max(worst, std::fabs(got - want) / std::fabs(want));
        }
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("Hilbert transform input validation") {
    CHECK(thrown_message([] { hilbert_dispersive(1e9, 1e-9, 5001); })
              .find("need at least 10001 grid points") != std::string::npos);
    CHECK(thrown_message([] { hilbert_dispersive(120.0 / 1e-9, 1e-9); })
              .find("too close to the grid edge") != std::string::npos);
}

}  // TEST_SUITE
