// Pulse-sequence DSL (block names, inversion, repetition, grouping), the
// refocusing block/supercycle builders, drive-inhomogeneity ensembles, and
// ensemble-averaged refocused-nutation decay simulation.
#pragma once

#include <string>
#include <vector>

#include "spindrive/bloch.hpp"
#include "spindrive/model.hpp"

namespace spindrive {

// Ordered pulses of one composite block. Signed flip angle: negative means
// the pulse is applied along -x instead of +x. Flip angles are nonzero.
struct PulseBlock {
    std::vector<double> flips;  // rad, signed
};

// R3 = [theta, -2*theta, theta]; R2 = [theta, -theta]. Nominal theta is pi.
// Both sum to zero net rotation, which is what makes them refocusing blocks.
PulseBlock build_r3(double theta);
PulseBlock build_r2(double theta);

// One element of a supercycle: a named block, optionally phase-inverted
// (all pulse signs flipped).
struct SupercycleEntry {
    std::string name;       // "R2" or "R3"
    bool inverted = false;
};

struct Supercycle {
    std::vector<SupercycleEntry> entries;

    // Total nominal duration once omega1 is fixed: sum(|flip|)/omega1 over
    // the whole expansion (theta = pi nominal).
    double period(double omega1) const;
    // Total pulse count of the expansion.
    std::size_t pulse_count() const;
};

// Grammar:  expr  := term+            (juxtaposition = concatenation)
//           term  := factor INT?      (integer repetition suffix, >= 1)
//           factor:= NAME | '~' factor | '(' expr ')'
// '~' inverts every block in its operand; double inversion cancels. Only R2
// and R3 are known names. Errors carry the 1-based character position.
Supercycle parse_sequence(const std::string& text);

// Canonical form: blocks separated by single spaces, '~' prefix on inverted
// blocks, no grouping or repetition. parse(print(sc)) reproduces sc.
std::string print_sequence(const Supercycle& sc);

// The 8-block alternating-inversion supercycle used throughout:
// R3 ~R3 ~R3 R3 ~R3 R3 R3 ~R3.
Supercycle supercycle_s();

// Resolves one entry to its pulse block at nominal theta = pi, applying the
// inversion flag.
PulseBlock block_for_entry(const SupercycleEntry& e);

// Discrete drive-amplitude ensemble: each member scales omega1 by `scale`
// and contributes `weight` to averages. Weights are normalized to sum to 1.
struct InhomogeneityPoint {
    double scale = 1.0;   // > 0
    double weight = 1.0;  // >= 0
};

struct InhomogeneitySpec {
    std::vector<InhomogeneityPoint> points;
};

InhomogeneitySpec inh_none();
// 7-node Gauss-Hermite discretization of a normal distribution with mean 1
// and fractional width sigma.
InhomogeneitySpec inh_gauss_hermite7(double sigma);
// n equally weighted scales spanning [1-width, 1+width].
InhomogeneitySpec inh_uniform(double width, int n);
void validate_inhomogeneity(const InhomogeneitySpec& inh);

// Builds the piecewise-constant program for one supercycle repetition count
// of 1. Durations use the NOMINAL amplitude (|flip|/omega1) while the actual
// amplitude is sign(flip)*omega1*scale, so scale != 1 produces flip-angle
// errors exactly like a mis-calibrated drive. Total duration is therefore
// independent of scale.
DriveProgram expand_to_program(const Supercycle& sc, double omega1, double scale);

struct DecayPoint {
    int n = 0;            // supercycle count
    double t = 0.0;       // n * period
    double mz = 0.0;      // ensemble-averaged
    double my_leakage = 0.0;
};

struct DecaySeries {
    std::vector<DecayPoint> points;
    SpinSystemParams params;
    double period = 0.0;  // seconds per supercycle
};

// Integrates n_max supercycle repetitions once per ensemble member from
// (0, 0, M0), samples the state at every supercycle boundary listed in
// n_values (strictly increasing, >= 1), and weight-averages Mz and My over
// the ensemble in a fixed order (members sorted by scale).
DecaySeries simulate_refocused_nutation(const SpinSystemParams& p, const Supercycle& sc,
                                        const InhomogeneitySpec& inh,
                                        const std::vector<int>& n_values, double step);

// Closed-form ratio of the residual transverse build-up of one 3-pulse block
// to that of two 2-pulse blocks of equal total duration:
//   -tanh( pi * (1/T1 + 1/T2 + 7*omega1^2*tau_c/2) / (2*omega1) ).
double leakage_ratio(const SpinSystemParams& p);

}  // namespace spindrive
