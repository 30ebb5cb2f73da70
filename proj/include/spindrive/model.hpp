// Physical parameter records and the closed-form second-order drive
// susceptibility: the complex bath Lorentzian, the counter-rotating
// (Bloch-Siegert) and resonant frequency shifts, and the drive-induced
// damping rates, plus the strong-field asymptote of the resonance shift.
#pragma once

#include <stdexcept>

namespace spindrive {

// All frequencies in rad/s, all times in s. omega1 is half the peak drive
// amplitude (linear drive 2*omega1*Ix*cos(omega*t)); gamma carries its sign.
struct SpinSystemParams {
    double omega0 = 0.0;        // Larmor angular frequency
    double omega1 = 0.0;        // drive amplitude, >= 0
    double omega_drive = 0.0;   // drive angular frequency
    double tau_c = 0.0;         // bath correlation time
    double kappa = 0.0;         // fluctuation strength; tau_c == 2/kappa^2
    double T1 = 0.0;            // longitudinal relaxation time
    double T2 = 0.0;            // transverse relaxation time
    double M0 = 1.0;            // equilibrium magnetization (arbitrary units)
    double gamma = 2.6752218744e8;  // gyromagnetic ratio, rad/s/T (proton default)

    double delta_omega() const { return omega_drive - omega0; }
    double Omega() const { return omega_drive + omega0; }
};

// Checks positivity and the timescale-separation bounds. tau_c*omega1 and
// tau_c*|delta_omega| must stay below 0.1 (hard error); a warning is printed
// above 0.01, where the second-order truncation begins to degrade. If kappa
// is nonzero it must be consistent with tau_c == 2/kappa^2.
void validate(const SpinSystemParams& p);

// Factories: tau_c primary (kappa derived as sqrt(2/tau_c)) or kappa primary
// (tau_c derived as 2/kappa^2). Both validate before returning.
SpinSystemParams make_params_tau(double omega0, double omega1, double omega_drive,
                                 double tau_c, double T1, double T2, double M0 = 1.0,
                                 double gamma = 2.6752218744e8);
SpinSystemParams make_params_kappa(double omega0, double omega1, double omega_drive,
                                   double kappa, double T1, double T2, double M0 = 1.0,
                                   double gamma = 2.6752218744e8);

// One-sided Fourier transform of the exponential bath kernel at frequency
// Omega: absorptive = tau_c/(1+Omega^2 tau_c^2), dispersive = Omega*tau_c *
// absorptive. The two components form a Kramers-Kronig pair.
struct ComplexLorentzian {
    double absorptive = 0.0;  // s
    double dispersive = 0.0;  // s
};

ComplexLorentzian compute_gamma(double Omega, double tau_c);

// Second-order drive susceptibility evaluated at the counter-rotating
// frequency Omega = omega_drive + omega0 and the resonant offset
// delta_omega = omega_drive - omega0:
//   omega_bs          = (omega1^2/2) * dispersive(Omega)
//   delta_omega_shift =  omega1^2    * dispersive(delta_omega)
//   eta_x             = (omega1^2/2) * absorptive(Omega)
//   eta_y             = eta_x + omega1^2 * absorptive(delta_omega)
//   eta_z             = omega1^2 * (absorptive(Omega) + absorptive(delta_omega))
// Note the resonant-channel shift intentionally carries no 1/2 factor; the
// two shift channels are asymmetric here by construction.
struct DriveCoefficients {
    double omega_bs = 0.0;           // rad/s
    double delta_omega_shift = 0.0;  // rad/s
    double eta_x = 0.0;              // 1/s
    double eta_y = 0.0;              // 1/s
    double eta_z = 0.0;              // 1/s
};

DriveCoefficients compute_coefficients(const SpinSystemParams& p);

// Segment-level variant used by the integrator: coefficients for drive
// magnitude omega1 at counter-rotating frequency Omega and offset d_omega.
DriveCoefficients compute_coefficients(double omega1, double Omega, double d_omega,
                                       double tau_c);

// Strong-field asymptote of the resonance shift expressed as an equivalent
// static-field shift: delta_b = -(1/gamma) * omega1^2 / (4*omega0), valid on
// resonance. asymptotic_regime flags Omega*tau_c > 1, where the full
// expression approaches this limit (relative gap 1/(1+Omega^2 tau_c^2)).
struct FieldShift {
    double delta_b = 0.0;  // Tesla
    bool asymptotic_regime = false;
};

FieldShift asymptotic_bs_shift(const SpinSystemParams& p);

}  // namespace spindrive
