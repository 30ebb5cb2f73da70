#include "spindrive/model.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace spindrive {

namespace {

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

void validate(const SpinSystemParams& p) {
    if (!(p.tau_c > 0.0)) fail("SpinSystemParams: tau_c must be > 0");
    if (!(p.T1 > 0.0)) fail("SpinSystemParams: T1 must be > 0");
    if (!(p.T2 > 0.0)) fail("SpinSystemParams: T2 must be > 0");
    if (!(p.omega1 >= 0.0)) fail("SpinSystemParams: omega1 must be >= 0");
    if (!std::isfinite(p.omega0) || !std::isfinite(p.omega_drive) ||
        !std::isfinite(p.omega1) || !std::isfinite(p.tau_c))
        fail("SpinSystemParams: frequencies and tau_c must be finite");
    if (p.gamma == 0.0) fail("SpinSystemParams: gamma must be nonzero");

    // Timescale separation: the second-order closed forms assume
    // tau_c << 1/omega1 and tau_c << 1/|delta_omega|.
    const double r1 = p.tau_c * p.omega1;
    const double r2 = p.tau_c * std::fabs(p.delta_omega());
    const double hard = 0.1, soft = 0.01;
    if (r1 >= hard || r2 >= hard) {
        std::ostringstream os;
        os << "SpinSystemParams: timescale separation violated: tau_c*omega1 = " << r1
           << ", tau_c*|delta_omega| = " << r2 << " (limit " << hard << ")";
        fail(os.str());
    }
    if (r1 > soft || r2 > soft) {
        std::cerr << "warning: tau_c*omega1 = " << r1 << ", tau_c*|delta_omega| = " << r2
                  << " exceed " << soft << "; second-order truncation degrades\n";
    }
    if (p.kappa != 0.0) {
        const double rel = std::fabs(p.tau_c * p.kappa * p.kappa / 2.0 - 1.0);
        if (rel > 1e-12) fail("SpinSystemParams: kappa inconsistent with tau_c == 2/kappa^2");
    }
}

SpinSystemParams make_params_tau(double omega0, double omega1, double omega_drive,
                                 double tau_c, double T1, double T2, double M0,
                                 double gamma) {
    SpinSystemParams p;
    p.omega0 = omega0;
    p.omega1 = omega1;
    p.omega_drive = omega_drive;
    p.tau_c = tau_c;
    p.kappa = tau_c > 0.0 ? std::sqrt(2.0 / tau_c) : 0.0;
    p.T1 = T1;
    p.T2 = T2;
    p.M0 = M0;
    p.gamma = gamma;
    validate(p);
    return p;
}

SpinSystemParams make_params_kappa(double omega0, double omega1, double omega_drive,
                                   double kappa, double T1, double T2, double M0,
                                   double gamma) {
    if (!(kappa > 0.0)) fail("SpinSystemParams: kappa must be > 0");
    SpinSystemParams p;
    p.omega0 = omega0;
    p.omega1 = omega1;
    p.omega_drive = omega_drive;
    p.kappa = kappa;
    p.tau_c = 2.0 / (kappa * kappa);
    p.T1 = T1;
    p.T2 = T2;
    p.M0 = M0;
    p.gamma = gamma;
    validate(p);
    return p;
}

ComplexLorentzian compute_gamma(double Omega, double tau_c) {
    if (!(tau_c > 0.0)) throw std::domain_error("compute_gamma: tau_c must be > 0");
    const double x = Omega * tau_c;
    const double denom = 1.0 + x * x;
    ComplexLorentzian g;
    g.absorptive = tau_c / denom;
    g.dispersive = x * g.absorptive;
    return g;
}

DriveCoefficients compute_coefficients(double omega1, double Omega, double d_omega,
                                       double tau_c) {
    DriveCoefficients c;
    if (omega1 == 0.0) return c;  // no drive, no susceptibility
    const double w2 = omega1 * omega1;
    const ComplexLorentzian gR = compute_gamma(Omega, tau_c);
    const ComplexLorentzian gC = compute_gamma(d_omega, tau_c);
    const double resonant_abs = w2 * gC.absorptive;
    c.omega_bs = 0.5 * w2 * gR.dispersive;
    c.delta_omega_shift = w2 * gC.dispersive;
    c.eta_x = 0.5 * w2 * gR.absorptive;
    c.eta_y = c.eta_x + resonant_abs;
    c.eta_z = 2.0 * c.eta_x + resonant_abs;
    return c;
}

DriveCoefficients compute_coefficients(const SpinSystemParams& p) {
    validate(p);
    return compute_coefficients(p.omega1, p.Omega(), p.delta_omega(), p.tau_c);
}

FieldShift asymptotic_bs_shift(const SpinSystemParams& p) {
    validate(p);
    if (p.delta_omega() != 0.0)
        throw std::invalid_argument("asymptotic_bs_shift: requires delta_omega == 0");
    if (p.omega0 == 0.0)
        throw std::invalid_argument("asymptotic_bs_shift: requires omega0 != 0");
    FieldShift out;
    out.delta_b = -(p.omega1 * p.omega1 / (4.0 * p.omega0)) / p.gamma;
    out.asymptotic_regime = p.Omega() * p.tau_c > 1.0;
    return out;
}

}  // namespace spindrive
