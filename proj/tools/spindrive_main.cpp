// Command-line front end: parses flags, loads the experiment config, and
// dispatches to the subcommand implementations. Exit codes: 0 success,
// 1 validation error, 2 numerical-tolerance failure.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "spindrive/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"spindrive: driven spin-1/2 simulator and analysis pipelines"};
    app.require_subcommand(1);

    struct SubState {
        std::string config_path;
        std::uint64_t seed = 0;
        bool seed_given = false;
        int workers = 1;
        std::string out_dir = ".";
        std::string format = "csv";
    };
    SubState st;

    const struct {
        const char* name;
        const char* desc;
    } subs[] = {
        {"coeffs", "report second-order drive coefficients and the asymptotic field shift"},
        {"nutation", "simulate continuous-wave nutation and extract frequency/damping"},
        {"refocus", "simulate a refocused-nutation decay series and fit its rate"},
        {"fig2", "sweep drive strength, fit decay rates, and fit the rate-vs-drive parabola"},
        {"oracle", "run the independent numerical cross-checks and report deviations"},
        {"fit", "fit a decay rate or rate-vs-drive parabola from a CSV file"},
    };
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.desc);
        sub->add_option("--config", st.config_path, "experiment config file (INI-style)")
            ->required();
        sub->add_option("--seed", st.seed, "RNG seed (overrides [noise].seed)")
            ->each([&st](const std::string&) { st.seed_given = true; });
        sub->add_option("--workers", st.workers, "worker threads for sweeps (default 1)");
        sub->add_option("--out", st.out_dir, "output directory (default .)");
        sub->add_option("--format", st.format, "table output format: csv or json (default csv)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    spindrive::CliOptions opt;
    if (st.seed_given) opt.seed_flag = st.seed;
    opt.workers = st.workers;
    opt.out_dir = st.out_dir;
    opt.format = st.format;

    const std::string name = app.get_subcommands().front()->get_name();
    return spindrive::run_command(name, st.config_path, opt);
}
