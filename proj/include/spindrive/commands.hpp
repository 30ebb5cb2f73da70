// Subcommand implementations behind the CLI front end. Each command loads
// everything it needs from an ExperimentConfig, writes machine-readable
// outputs into an output directory, and returns a process exit code:
// 0 success, 1 validation error, 2 numerical-tolerance failure.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spindrive/config.hpp"
#include "spindrive/fit.hpp"
#include "spindrive/sequence.hpp"

namespace spindrive {

// Raised when a computed quantity violates a configured tolerance; the CLI
// maps it to exit code 2, distinct from validation failures (exit 1).
struct ToleranceFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CliOptions {
    std::optional<std::uint64_t> seed_flag;  // --seed; overrides [noise].seed
    std::uint64_t seed = 0;                  // effective seed (resolved)
    int workers = 1;
    std::string out_dir = ".";
    std::string format = "csv";  // table encoding: "csv" or "json"
};

int cmd_coeffs(const ExperimentConfig& cfg, const CliOptions& opt);
int cmd_nutation(const ExperimentConfig& cfg, const CliOptions& opt);
int cmd_refocus(const ExperimentConfig& cfg, const CliOptions& opt);
int cmd_fig2(const ExperimentConfig& cfg, const CliOptions& opt);
int cmd_oracle(const ExperimentConfig& cfg, const CliOptions& opt);
int cmd_fit(const ExperimentConfig& cfg, const CliOptions& opt);

// Loads the config, resolves the effective seed (flag wins over
// [noise].seed), dispatches to the subcommand, and maps exceptions to exit
// codes. `name` is one of coeffs/nutation/refocus/fig2/oracle/fit.
int run_command(const std::string& name, const std::string& config_path, const CliOptions& opt);

// Structural self-check of the coefficient report. Throws
// std::invalid_argument describing the first schema violation.
void validate_coeffs_report(const std::string& json_text);

// The rate-vs-drive sweep is split so that repeated noise seeds can reuse a
// single noiseless simulation: simulate_fig2_base does the expensive
// integrations, fig2_from_base applies measurement noise and fits. cmd_fig2
// composes the two, so in-process callers exercise the same code path.
struct Fig2Base {
    std::vector<double> omega1_hz;                // sweep grid as configured
    std::vector<double> omega1;                   // rad/s, sweep order
    std::vector<std::vector<DecayPoint>> series;  // noiseless decay per sweep point
};

struct Fig2Point {
    double omega1 = 0.0;  // rad/s
    double rate = 0.0;    // fitted decay rate, 1/s
    double ci = 0.0;      // 95% half-width, 1/s
};

struct Fig2Result {
    std::vector<Fig2Point> points;
    ParabolaFit fit;
};

Fig2Base simulate_fig2_base(const ExperimentConfig& cfg, int workers);
Fig2Result fig2_from_base(const Fig2Base& base, const ExperimentConfig& cfg,
                          std::uint64_t seed);

// Deterministic measurement-noise draw for sweep point k, sample j; keyed by
// indices so results are independent of worker count and evaluation order.
double noise_draw(std::uint64_t seed, std::uint64_t k, std::uint64_t j);

}  // namespace spindrive
