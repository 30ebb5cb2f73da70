#include "spindrive/commands.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "spindrive/bloch.hpp"
#include "spindrive/numerics.hpp"
#include "spindrive/oracle.hpp"

namespace spindrive {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string hash_hex(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open output file '" + path + "'");
    out << content;
    out.flush();
    if (!out) fail("failed writing output file '" + path + "'");
}

std::string out_path(const CliOptions& opt, const std::string& name) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec) fail("cannot create output directory '" + opt.out_dir + "': " + ec.message());
    return (fs::path(opt.out_dir) / name).string();
}

// Plain numeric table; encoded as CSV or as a JSON column/row object so both
// formats carry identical values.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

std::string render_table_csv(const Table& t, const std::string& hash) {
    std::string s = "# config_hash=" + hash + "\n";
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (c) s += ",";
        s += t.columns[c];
    }
    s += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) s += ",";
            s += fmt17(row[c]);
        }
        s += "\n";
    }
    return s;
}

std::string render_table_json(const Table& t, const std::string& hash) {
    ojson j;
    j["config_hash"] = hash;
    j["columns"] = t.columns;
    ojson rows = ojson::array();
    for (const auto& row : t.rows) rows.push_back(row);
    j["rows"] = std::move(rows);
    return j.dump(2) + "\n";
}

// Writes the table in the selected format; returns the path written.
std::string write_table(const CliOptions& opt, const std::string& basename, const Table& t,
                        const std::string& hash) {
    const bool csv = opt.format == "csv";
    const std::string path = out_path(opt, basename + (csv ? ".csv" : ".json"));
    write_text_file(path, csv ? render_table_csv(t, hash) : render_table_json(t, hash));
    return path;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string trim_copy(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim_copy(line.substr(start)));
            break;
        }
        out.push_back(trim_copy(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

Supercycle load_sequence(const ExperimentConfig& cfg) {
    const bool has_text = cfg.has("sequence", "text");
    const bool has_file = cfg.has("sequence", "file");
    if (has_text && has_file) fail("config: [sequence] text and file are mutually exclusive");
    if (has_file) return parse_sequence(read_file(cfg.get_string("sequence", "file")));
    return parse_sequence(
        cfg.get_string_or("sequence", "text", "R3 ~R3 ~R3 R3 ~R3 R3 R3 ~R3"));
}

InhomogeneitySpec load_inhomogeneity(const ExperimentConfig& cfg) {
    const std::string kind = cfg.get_string_or("inhomogeneity", "kind", "none");
    auto reject = [&](const char* key) {
        if (cfg.has("inhomogeneity", key))
            fail(std::string("config: [inhomogeneity].") + key + " does not apply to kind '" +
                 kind + "'");
    };
    if (kind == "none") {
        reject("sigma");
        reject("width");
        reject("points");
        return inh_none();
    }
    if (kind == "gauss") {
        reject("width");
        reject("points");
        return inh_gauss_hermite7(cfg.get_double("inhomogeneity", "sigma"));
    }
    if (kind == "uniform") {
        reject("sigma");
        return inh_uniform(cfg.get_double("inhomogeneity", "width"),
                           static_cast<int>(cfg.get_int_or("inhomogeneity", "points", 7)));
    }
    fail("config: [inhomogeneity].kind must be none, gauss, or uniform (got '" + kind + "')");
}

double max_scale(const InhomogeneitySpec& inh) {
    double m = 0.0;
    for (const auto& pt : inh.points) m = std::max(m, pt.scale);
    return m;
}

// Integrator step: explicit [integrator].step wins; otherwise
// step_fraction (radians of drive rotation per step) divided by the largest
// amplitude in play.
double resolve_step(const ExperimentConfig& cfg, double omega1_max) {
    const bool has_step = cfg.has("integrator", "step");
    const bool has_frac = cfg.has("integrator", "step_fraction");
    if (has_step && has_frac)
        fail("config: [integrator] step and step_fraction are mutually exclusive");
    if (has_step) return cfg.get_double("integrator", "step");
    const double frac = cfg.get_double_or("integrator", "step_fraction", 0.04);
    if (!(frac > 0.0)) fail("config: [integrator].step_fraction must be > 0");
    if (!(omega1_max > 0.0)) fail("config: cannot derive step from step_fraction with omega1 == 0");
    return frac / omega1_max;
}

std::vector<int> sweep_n_values(const ExperimentConfig& cfg, double period) {
    const long n_start = cfg.get_int_or("sweep", "n_start", 1);
    const long n_stop = cfg.get_int_or("sweep", "n_stop", 121);
    const long n_step = cfg.get_int_or("sweep", "n_step", 5);
    if (n_start < 1) fail("config: [sweep].n_start must be >= 1");
    if (n_step < 1) fail("config: [sweep].n_step must be >= 1");
    if (n_stop < n_start) fail("config: [sweep].n_stop must be >= n_start");
    const double guard = cfg.get_double_or("sweep", "max_drive_time", 0.5);
    if (!(guard > 0.0)) fail("config: [sweep].max_drive_time must be > 0");
    std::vector<int> ns;
    for (long n = n_start; n <= n_stop; n += n_step)
        if (static_cast<double>(n) * period <= guard) ns.push_back(static_cast<int>(n));
    if (ns.size() < 5)
        fail("config: n sweep leaves fewer than 5 points after the max_drive_time guard");
    return ns;
}

AsymptoteMode resolve_asymptote_mode(const ExperimentConfig& cfg) {
    const std::string mode =
        cfg.get_string_or("fit", "asymptote_mode", "subtract-fitted-asymptote");
    if (mode == "subtract-fitted-asymptote") return AsymptoteMode::SubtractFitted;
    if (mode == "raw-log") return AsymptoteMode::RawLog;
    fail("config: [fit].asymptote_mode must be subtract-fitted-asymptote or raw-log (got '" +
         mode + "')");
}

std::string asymptote_mode_name(AsymptoteMode m) {
    return m == AsymptoteMode::SubtractFitted ? "subtract-fitted-asymptote" : "raw-log";
}

ojson number_or_inf(double v) {
    if (std::isinf(v)) return ojson(v > 0 ? "inf" : "-inf");
    return ojson(v);
}

}  // namespace

double noise_draw(std::uint64_t seed, std::uint64_t k, std::uint64_t j) {
    std::uint64_t h = splitmix64(seed ^ 0x6A09E667F3BCC909ULL);
    h = splitmix64(h ^ (k + 1));
    h = splitmix64(h ^ (j + 1));
    GaussStream g(h);
    return g.next();
}

// ---------------------------------------------------------------------------
// coeffs

void validate_coeffs_report(const std::string& json_text) {
    ojson j;
    try {
        j = ojson::parse(json_text);
    } catch (const std::exception& e) {
        fail(std::string("coeffs report: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) fail("coeffs report: top level must be an object");

    auto require = [&](const ojson& obj, const std::string& key, const std::string& ctx) -> const ojson& {
        if (!obj.contains(key)) fail("coeffs report: missing " + ctx + "." + key);
        return obj.at(key);
    };
    auto require_number = [&](const ojson& obj, const std::string& key, const std::string& ctx) {
        if (!require(obj, key, ctx).is_number())
            fail("coeffs report: " + ctx + "." + key + " must be a number");
        return obj.at(key).get<double>();
    };

    const ojson& hash = require(j, "config_hash", "$");
    if (!hash.is_string() || hash.get<std::string>().size() != 16 ||
        hash.get<std::string>().find_first_not_of("0123456789abcdef") != std::string::npos)
        fail("coeffs report: config_hash must be 16 lowercase hex characters");

    const ojson& in = require(j, "inputs", "$");
    if (!in.is_object()) fail("coeffs report: inputs must be an object");
    for (const char* key : {"omega0", "omega1", "omega_drive", "delta_omega", "Omega", "tau_c",
                            "kappa", "m0", "gamma"})
        require_number(in, key, "inputs");
    for (const char* key : {"t1", "t2"}) {
        const ojson& v = require(in, key, "inputs");
        if (!v.is_number() && !(v.is_string() && v.get<std::string>() == "inf"))
            fail(std::string("coeffs report: inputs.") + key + " must be a number or \"inf\"");
    }

    const ojson& sus = require(j, "susceptibility", "$");
    for (const char* branch : {"counter_rotating", "co_rotating"}) {
        const ojson& b = require(sus, branch, "susceptibility");
        if (!b.is_object()) fail(std::string("coeffs report: susceptibility.") + branch +
                                 " must be an object");
        require_number(b, "absorptive", std::string("susceptibility.") + branch);
        require_number(b, "dispersive", std::string("susceptibility.") + branch);
    }

    const ojson& co = require(j, "coefficients", "$");
    for (const char* key : {"omega_bs", "delta_omega_shift", "eta_x", "eta_y", "eta_z"})
        require_number(co, key, "coefficients");
    for (const char* key : {"eta_x", "eta_y", "eta_z"})
        if (co.at(key).get<double>() < 0.0)
            fail(std::string("coeffs report: coefficients.") + key + " must be >= 0");

    const ojson& shift = require(j, "asymptotic_shift", "$");
    if (!shift.is_null()) {
        if (!shift.is_object()) fail("coeffs report: asymptotic_shift must be null or an object");
        require_number(shift, "delta_b_tesla", "asymptotic_shift");
        if (!require(shift, "asymptotic_regime", "asymptotic_shift").is_boolean())
            fail("coeffs report: asymptotic_shift.asymptotic_regime must be a boolean");
    }
}

int cmd_coeffs(const ExperimentConfig& cfg, const CliOptions& opt) {
    const SpinSystemParams p = cfg.build_params();
    const DriveCoefficients c = compute_coefficients(p);
    const ComplexLorentzian g_counter = compute_gamma(p.Omega(), p.tau_c);
    const ComplexLorentzian g_co = compute_gamma(p.delta_omega(), p.tau_c);

    ojson j;
    j["config_hash"] = hash_hex(cfg.hash_with_seed(opt.seed));
    ojson in;
    in["omega0"] = p.omega0;
    in["omega1"] = p.omega1;
    in["omega_drive"] = p.omega_drive;
    in["delta_omega"] = p.delta_omega();
    in["Omega"] = p.Omega();
    in["tau_c"] = p.tau_c;
    in["kappa"] = p.kappa;
    in["t1"] = number_or_inf(p.T1);
    in["t2"] = number_or_inf(p.T2);
    in["m0"] = p.M0;
    in["gamma"] = p.gamma;
    j["inputs"] = std::move(in);
    ojson sus;
    sus["counter_rotating"] = {{"absorptive", g_counter.absorptive},
                               {"dispersive", g_counter.dispersive}};
    sus["co_rotating"] = {{"absorptive", g_co.absorptive}, {"dispersive", g_co.dispersive}};
    j["susceptibility"] = std::move(sus);
    ojson co;
    co["omega_bs"] = c.omega_bs;
    co["delta_omega_shift"] = c.delta_omega_shift;
    co["eta_x"] = c.eta_x;
    co["eta_y"] = c.eta_y;
    co["eta_z"] = c.eta_z;
    j["coefficients"] = std::move(co);
    if (p.delta_omega() == 0.0 && p.omega0 != 0.0) {
        const FieldShift fs = asymptotic_bs_shift(p);
        j["asymptotic_shift"] = {{"delta_b_tesla", fs.delta_b},
                                 {"asymptotic_regime", fs.asymptotic_regime}};
    } else {
        j["asymptotic_shift"] = nullptr;
    }

    const std::string text = j.dump(2) + "\n";
    validate_coeffs_report(text);  // self-check before anything is written
    const std::string path = out_path(opt, "coeffs.json");
    write_text_file(path, text);
    std::cout << "wrote " << path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// nutation

int cmd_nutation(const ExperimentConfig& cfg, const CliOptions& opt) {
    const SpinSystemParams p = cfg.build_params();
    const double duration = cfg.get_double("integrator", "duration");
    const double step = resolve_step(cfg, p.omega1);
    const NutationMetrics metrics = simulate_cw_nutation(p, duration, step);

    // Linearized small-damping prediction for reference alongside the
    // measured values.
    const DriveCoefficients c = compute_coefficients(p);
    const double inv_t1 = std::isinf(p.T1) ? 0.0 : 1.0 / p.T1;
    const double inv_t2 = std::isinf(p.T2) ? 0.0 : 1.0 / p.T2;
    const double expected = 0.5 * ((inv_t1 + c.eta_z) + (inv_t2 + c.eta_y));

    ojson j;
    j["config_hash"] = hash_hex(cfg.hash_with_seed(opt.seed));
    j["omega1"] = p.omega1;
    j["nutation_frequency"] = metrics.nutation_frequency;
    j["damping_rate"] = metrics.damping_rate;
    j["fit_residual"] = metrics.fit_residual;
    j["expected_damping_linearized"] = expected;
    const std::string path = out_path(opt, "nutation.json");
    write_text_file(path, j.dump(2) + "\n");
    std::cout << "wrote " << path << "\n";

    if (cfg.get_bool_or("integrator", "trajectory", false)) {
        const int stride = static_cast<int>(cfg.get_int_or("integrator", "trajectory_stride", 16));
        DriveProgram prog = DriveProgram::from_segments({{p.omega1, duration, 0.0}});
        const auto traj = integrate({0.0, 0.0, p.M0, 0.0}, prog, p, step, stride);
        Table t;
        t.columns = {"t", "mx", "my", "mz"};
        t.rows.reserve(traj.size());
        for (const auto& s : traj) t.rows.push_back({s.t, s.mx, s.my, s.mz});
        const std::string tpath =
            write_table(opt, "nutation_trajectory", t, hash_hex(cfg.hash_with_seed(opt.seed)));
        std::cout << "wrote " << tpath << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// refocus

int cmd_refocus(const ExperimentConfig& cfg, const CliOptions& opt) {
    const SpinSystemParams p = cfg.build_params();
    const Supercycle sc = load_sequence(cfg);
    const InhomogeneitySpec inh = load_inhomogeneity(cfg);
    const double period = sc.period(p.omega1);
    const std::vector<int> ns = sweep_n_values(cfg, period);
    const double step = resolve_step(cfg, p.omega1 * max_scale(inh));

    DecaySeries series = simulate_refocused_nutation(p, sc, inh, ns, step);
    const double sigma = cfg.get_double_or("noise", "measurement_sigma", 0.0);
    if (sigma > 0.0)
        for (std::size_t jdx = 0; jdx < series.points.size(); ++jdx)
            series.points[jdx].mz += sigma * p.M0 * noise_draw(opt.seed, 0, jdx);

    const std::string hash = hash_hex(cfg.hash_with_seed(opt.seed));
    Table t;
    t.columns = {"n", "t", "mz", "my_leakage"};
    for (const auto& pt : series.points)
        t.rows.push_back({static_cast<double>(pt.n), pt.t, pt.mz, pt.my_leakage});
    const std::string tpath = write_table(opt, "refocus", t, hash);
    std::cout << "wrote " << tpath << "\n";

    const AsymptoteMode mode = resolve_asymptote_mode(cfg);
    const RateFit rf = fit_decay_rate(series, mode);
    ojson j;
    j["config_hash"] = hash;
    j["rate"] = rf.rate;
    j["intercept"] = rf.intercept;
    j["residual_rms"] = rf.residual_rms;
    j["ci95_halfwidth"] = rf.ci95_halfwidth;
    j["n_points"] = series.points.size();
    j["asymptote_mode"] = asymptote_mode_name(mode);
    const std::string fpath = out_path(opt, "refocus_fit.json");
    write_text_file(fpath, j.dump(2) + "\n");
    std::cout << "wrote " << fpath << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fig2

Fig2Base simulate_fig2_base(const ExperimentConfig& cfg, int workers) {
    const double start_hz = cfg.get_double("sweep", "omega1_start_hz");
    const double stop_hz = cfg.get_double("sweep", "omega1_stop_hz");
    const double step_hz = cfg.get_double_or("sweep", "omega1_step_hz", 1000.0);
    if (!(start_hz > 0.0) || !(step_hz > 0.0) || !(stop_hz >= start_hz))
        fail("config: [sweep] omega1 grid must satisfy 0 < start <= stop, step > 0");

    Fig2Base base;
    for (double nu = start_hz; nu <= stop_hz * (1.0 + 1e-12); nu += step_hz) {
        base.omega1_hz.push_back(nu);
        base.omega1.push_back(kTwoPi * nu);
    }
    const std::size_t count = base.omega1.size();
    base.series.resize(count);

    const Supercycle sc = load_sequence(cfg);
    const InhomogeneitySpec inh = load_inhomogeneity(cfg);
    const double scale_hi = max_scale(inh);

    std::vector<std::exception_ptr> errors(count);
    auto work = [&](std::size_t k) {
        const double w1 = base.omega1[k];
        const SpinSystemParams p = cfg.build_params_with_omega1(w1);
        const double period = sc.period(w1);
        const std::vector<int> ns = sweep_n_values(cfg, period);
        const double step = resolve_step(cfg, w1 * scale_hi);
        base.series[k] = simulate_refocused_nutation(p, sc, inh, ns, step).points;
    };

    if (workers <= 1 || count <= 1) {
        for (std::size_t k = 0; k < count; ++k) {
            try {
                work(k);
            } catch (const std::exception& e) {
                fail("fig2: omega1_hz=" + fmt17(base.omega1_hz[k]) + ": " + e.what());
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto runner = [&] {
            for (std::size_t k = next.fetch_add(1); k < count; k = next.fetch_add(1)) {
                try {
                    work(k);
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const int n_threads = std::min<int>(workers, static_cast<int>(count));
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(runner);
        for (auto& th : pool) th.join();
        for (std::size_t k = 0; k < count; ++k) {
            if (errors[k]) {
                try {
                    std::rethrow_exception(errors[k]);
                } catch (const std::exception& e) {
                    fail("fig2: omega1_hz=" + fmt17(base.omega1_hz[k]) + ": " + e.what());
                }
            }
        }
    }
    return base;
}

Fig2Result fig2_from_base(const Fig2Base& base, const ExperimentConfig& cfg,
                          std::uint64_t seed) {
    const double sigma = cfg.get_double_or("noise", "measurement_sigma", 0.0);
    const double m0 = cfg.get_double_or("model", "m0", 1.0);
    const AsymptoteMode mode = resolve_asymptote_mode(cfg);

    Fig2Result res;
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t k = 0; k < base.omega1.size(); ++k) {
        std::vector<double> t, m;
        t.reserve(base.series[k].size());
        m.reserve(base.series[k].size());
        for (std::size_t jdx = 0; jdx < base.series[k].size(); ++jdx) {
            t.push_back(base.series[k][jdx].t);
            double v = base.series[k][jdx].mz;
            if (sigma > 0.0) v += sigma * m0 * noise_draw(seed, k, jdx);
            m.push_back(v);
        }
        RateFit rf;
        try {
            rf = fit_decay_rate(t, m, mode);
        } catch (const std::exception& e) {
            fail("fig2 fit: omega1_hz=" + fmt17(base.omega1_hz[k]) + ": " + e.what());
        }
        res.points.push_back({base.omega1[k], rf.rate, rf.ci95_halfwidth});
        pairs.emplace_back(base.omega1[k], rf.rate);
    }
    res.fit = fit_parabola(pairs);
    return res;
}

int cmd_fig2(const ExperimentConfig& cfg, const CliOptions& opt) {
    const Fig2Base base = simulate_fig2_base(cfg, opt.workers);
    const Fig2Result res = fig2_from_base(base, cfg, opt.seed);

    const std::string hash = hash_hex(cfg.hash_with_seed(opt.seed));
    Table t;
    t.columns = {"omega1_hz", "rz", "ci"};
    for (std::size_t k = 0; k < res.points.size(); ++k)
        t.rows.push_back({base.omega1_hz[k], res.points[k].rate, res.points[k].ci});
    const std::string tpath = write_table(opt, "fig2", t, hash);
    std::cout << "wrote " << tpath << "\n";

    ojson j;
    j["config_hash"] = hash;
    j["a1"] = res.fit.a1;
    j["b1"] = res.fit.b1;
    j["tau_c_estimate"] = res.fit.tau_c_estimate;
    j["ci95_a1"] = res.fit.ci95_a1;
    j["ci95_b1"] = res.fit.ci95_b1;
    j["n_points"] = res.points.size();
    const std::string fpath = out_path(opt, "fig2_fit.json");
    write_text_file(fpath, j.dump(2) + "\n");
    std::cout << "wrote " << fpath << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// oracle

namespace {

struct CheckResult {
    std::string name;
    double tolerance = 0.0;
    double measured = 0.0;
    bool pass = false;
};

CheckResult check_gamma(const ExperimentConfig& cfg) {
    CheckResult r;
    r.name = "gamma";
    r.tolerance = cfg.get_double_or("oracle", "gamma_tol_rel", 1e-9);
    const double tau_c = 1e-9;
    std::vector<double> xs = {0.0};
    for (int i = 0; i < 49; ++i)
        xs.push_back(0.01 * std::pow(100.0 / 0.01, static_cast<double>(i) / 48.0));
    double worst = 0.0;
    for (double x : xs) {
        const double Om = x / tau_c;
        const ComplexLorentzian closed = compute_gamma(Om, tau_c);
        const ComplexLorentzian quad = gamma_quadrature(Om, tau_c);
        const double norm = std::hypot(closed.absorptive, closed.dispersive);
        const double dev = std::hypot(closed.absorptive - quad.absorptive,
                                      closed.dispersive - quad.dispersive) / norm;
        worst = std::max(worst, dev);
    }
    r.measured = worst;
    r.pass = worst <= r.tolerance;
    return r;
}

CheckResult check_kernel(const ExperimentConfig& cfg, std::uint64_t seed) {
    CheckResult r;
    r.name = "kernel";
    r.tolerance = cfg.get_double_or("oracle", "kernel_tol_se", 3.0);
    const double tau_c = 1e-3;
    const double kappa = std::sqrt(2.0 / tau_c);
    const int n_traj = static_cast<int>(cfg.get_int_or("oracle", "n_traj", 10000));
    const double dt = tau_c / 128.0;
    std::vector<double> grid(20);
    for (int j = 0; j < 20; ++j) grid[j] = 3.0 * tau_c * static_cast<double>(j) / 19.0;

    const KernelEstimate est = mc_memory_kernel(kappa, grid, n_traj, dt, seed);
    // Negative control: the test hook corrupts the reference decay rate, so
    // the comparison must fail and drive the tolerance exit path.
    const double corrupt = cfg.get_bool_or("oracle", "corrupt_kernel", false) ? 1.5 : 1.0;
    double worst = 0.0;
    for (std::size_t j = 0; j < est.tau.size(); ++j) {
        const double ref = std::exp(-0.5 * corrupt * kappa * kappa * est.tau[j]);
        const double dev_re = std::abs(est.kernel[j].real() - ref);
        const double dev_im = std::abs(est.kernel[j].imag());
        if (est.se_real[j] == 0.0 || est.se_imag[j] == 0.0) {
            // Zero-lag phases are exactly 1; any deviation is a hard failure.
            if (dev_re > 0.0 || dev_im > 0.0) worst = std::max(worst, 1e300);
            continue;
        }
        worst = std::max(worst, dev_re / est.se_real[j]);
        worst = std::max(worst, dev_im / est.se_imag[j]);
    }
    r.measured = worst;
    r.pass = worst <= r.tolerance;
    return r;
}

CheckResult check_rates(const ExperimentConfig& cfg) {
    CheckResult r;
    r.name = "rates";
    r.tolerance = cfg.get_double_or("oracle", "rate_tol_rel", 0.05);
    const double tau_c = 1e-9;
    const double Om = 1.0 / tau_c;  // Omega*tau_c = 1
    const int periods = 64;
    const double delta_t = periods * kTwoPi / Om;
    const double omega1 = 0.01 / delta_t;
    const int quad_points =
        static_cast<int>(cfg.get_int_or("oracle", "quad_points", 32L * periods));
    const SpinSystemParams p =
        make_params_tau(0.5 * Om, omega1, 0.5 * Om, tau_c,
                        std::numeric_limits<double>::infinity(),
                        std::numeric_limits<double>::infinity());
    const DriveCoefficients c = compute_coefficients(p);

    auto channel_rates = [&](double bx, double by, double bz, double ref[3], double out[3]) {
        const DensityMatrix2 rho = DensityMatrix2::from_bloch(bx, by, bz);
        const DensityMatrix2 inc = coarse_grained_step(rho, p, 0.0, delta_t, quad_points);
        rho.pauli_vector(ref);
        inc.pauli_vector(out);
    };
    double r0[3], dr[3];
    channel_rates(0.0, 0.0, 1.0, r0, dr);
    const double eta_z_est = -dr[2] / (r0[2] * delta_t);
    channel_rates(1.0, 0.0, 0.0, r0, dr);
    const double eta_x_est = -dr[0] / (r0[0] * delta_t);
    const double omega_bs_est = dr[1] / (r0[0] * delta_t);

    double worst = std::abs(eta_z_est - c.eta_z) / c.eta_z;
    worst = std::max(worst, std::abs(eta_x_est - c.eta_x) / c.eta_x);
    worst = std::max(worst, std::abs(omega_bs_est - c.omega_bs) / std::abs(c.omega_bs));
    r.measured = worst;
    r.pass = worst <= r.tolerance;
    return r;
}

CheckResult check_commutator() {
    CheckResult r;
    r.name = "commutator";
    r.tolerance = 1e-12;
    double worst = commutator_identity_check(0.0, 0.2);
    worst = std::max(worst, commutator_identity_check(kTwoPi * 100.0, 0.37));
    r.measured = worst;
    r.pass = worst <= r.tolerance;
    return r;
}

CheckResult check_secular(const ExperimentConfig& cfg) {
    CheckResult r;
    r.name = "secular";
    r.tolerance = cfg.get_double_or("oracle", "cross_tol", 1e-3);
    const double Om = kTwoPi * 1e9;
    const SpinSystemParams p =
        make_params_tau(0.5 * Om, kTwoPi * 5e3, 0.5 * Om, 1e-12,
                        std::numeric_limits<double>::infinity(),
                        std::numeric_limits<double>::infinity());
    r.measured = secular_crossterm_magnitude(p, 1e-6);
    r.pass = r.measured <= r.tolerance;
    return r;
}

CheckResult check_hilbert(const ExperimentConfig& cfg) {
    CheckResult r;
    r.name = "hilbert";
    r.tolerance = cfg.get_double_or("oracle", "hilbert_tol_rel", 1e-3);
    const double tau_c = 1e-9;
    double worst = 0.0;
    for (double mag : {0.5, 2.0, 10.0, 50.0}) {
        for (double sign : {-1.0, 1.0}) {
            const double Om = sign * mag / tau_c;
            const double num = hilbert_dispersive(Om, tau_c);
            const double exact = compute_gamma(Om, tau_c).dispersive;
            worst = std::max(worst, std::abs(num - exact) / std::abs(exact));
        }
    }
    r.measured = worst;
    r.pass = worst <= r.tolerance;
    return r;
}

}  // namespace

int cmd_oracle(const ExperimentConfig& cfg, const CliOptions& opt) {
    const std::string list =
        cfg.get_string_or("oracle", "checks", "gamma,kernel,rates,commutator,secular,hilbert");
    std::vector<std::string> names;
    std::istringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string name = trim_copy(item);
        if (!name.empty()) names.push_back(name);
    }
    if (names.empty()) fail("config: [oracle].checks is empty");

    std::vector<CheckResult> results;
    for (const auto& name : names) {
        if (name == "gamma")
            results.push_back(check_gamma(cfg));
        else if (name == "kernel")
            results.push_back(check_kernel(cfg, opt.seed));
        else if (name == "rates")
            results.push_back(check_rates(cfg));
        else if (name == "commutator")
            results.push_back(check_commutator());
        else if (name == "secular")
            results.push_back(check_secular(cfg));
        else if (name == "hilbert")
            results.push_back(check_hilbert(cfg));
        else
            fail("config: unknown oracle check '" + name + "'");
    }

    bool all_pass = true;
    ojson checks = ojson::array();
    for (const auto& r : results) {
        all_pass = all_pass && r.pass;
        ojson c;
        c["check"] = r.name;
        c["tolerance"] = r.tolerance;
        c["measured"] = r.measured;
        c["pass"] = r.pass;
        checks.push_back(std::move(c));
        std::cout << r.name << ": measured=" << fmt17(r.measured)
                  << " tolerance=" << fmt17(r.tolerance) << (r.pass ? " PASS" : " FAIL") << "\n";
    }
    ojson j;
    j["config_hash"] = hash_hex(cfg.hash_with_seed(opt.seed));
    j["checks"] = std::move(checks);
    j["all_pass"] = all_pass;
    const std::string path = out_path(opt, "oracle.json");
    write_text_file(path, j.dump(2) + "\n");
    std::cout << "wrote " << path << "\n";

    if (!all_pass) throw ToleranceFailure("oracle: at least one check exceeded its tolerance");
    return 0;
}

// ---------------------------------------------------------------------------
// fit

int cmd_fit(const ExperimentConfig& cfg, const CliOptions& opt) {
    // Relative inputs resolve against --out so a fit can chain onto the
    // table a previous run wrote there.
    namespace fs = std::filesystem;
    std::string input = cfg.get_string("fit", "input");
    if (!fs::path(input).is_absolute()) input = (fs::path(opt.out_dir) / input).string();
    const std::string text = read_file(input);

    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim_copy(line);
        if (t.empty() || t[0] == '#') continue;
        rows.push_back(split_csv_line(t));
    }
    if (rows.size() < 2) fail("fit input '" + input + "': need a header and at least one row");

    const std::vector<std::string>& header = rows.front();
    auto column = [&](const std::string& name) -> int {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return static_cast<int>(c);
        return -1;
    };
    auto cell = [&](std::size_t row, int col) -> double {
        const std::string& v = rows[row][static_cast<std::size_t>(col)];
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (end != v.c_str() + v.size())
            fail("fit input '" + input + "': cannot parse '" + v + "' as a number");
        return x;
    };
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].size() != header.size())
            fail("fit input '" + input + "': row " + std::to_string(i) + " has " +
                 std::to_string(rows[i].size()) + " fields, header has " +
                 std::to_string(header.size()));

    const std::string hash = hash_hex(cfg.hash_with_seed(opt.seed));
    ojson j;
    j["config_hash"] = hash;

    const int col_nu = column("omega1_hz");
    const int col_rz = column("rz");
    if (col_nu >= 0 && col_rz >= 0) {
        std::vector<std::pair<double, double>> pairs;
        for (std::size_t i = 1; i < rows.size(); ++i)
            pairs.emplace_back(kTwoPi * cell(i, col_nu), cell(i, col_rz));
        const ParabolaFit pf = fit_parabola(pairs);
        j["kind"] = "parabola";
        j["a1"] = pf.a1;
        j["b1"] = pf.b1;
        j["tau_c_estimate"] = pf.tau_c_estimate;
        j["ci95_a1"] = pf.ci95_a1;
        j["ci95_b1"] = pf.ci95_b1;
        j["n_points"] = pairs.size();
    } else {
        const int col_t = column("t");
        const int col_mz = column("mz");
        if (col_t < 0 || col_mz < 0)
            fail("fit input '" + input +
                 "': header must contain either (omega1_hz, rz) or (t, mz) columns");
        std::vector<double> t, m;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            t.push_back(cell(i, col_t));
            m.push_back(cell(i, col_mz));
        }
        const AsymptoteMode mode = resolve_asymptote_mode(cfg);
        const RateFit rf = fit_decay_rate(t, m, mode);
        j["kind"] = "decay_rate";
        j["rate"] = rf.rate;
        j["intercept"] = rf.intercept;
        j["residual_rms"] = rf.residual_rms;
        j["ci95_halfwidth"] = rf.ci95_halfwidth;
        j["n_points"] = t.size();
        j["asymptote_mode"] = asymptote_mode_name(mode);
    }

    const std::string path = out_path(opt, "fit.json");
    write_text_file(path, j.dump(2) + "\n");
    std::cout << "wrote " << path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// dispatch

int run_command(const std::string& name, const std::string& config_path, const CliOptions& opt) {
    try {
        if (config_path.empty()) fail("missing --config");
        const ExperimentConfig cfg = ExperimentConfig::load_file(config_path);
        CliOptions eff = opt;
        eff.seed = opt.seed_flag ? *opt.seed_flag
                                 : static_cast<std::uint64_t>(cfg.get_int_or("noise", "seed", 0));
        if (eff.workers < 1) fail("--workers must be >= 1");
        if (eff.format != "csv" && eff.format != "json") fail("--format must be csv or json");
        if (name == "coeffs") return cmd_coeffs(cfg, eff);
        if (name == "nutation") return cmd_nutation(cfg, eff);
        if (name == "refocus") return cmd_refocus(cfg, eff);
        if (name == "fig2") return cmd_fig2(cfg, eff);
        if (name == "oracle") return cmd_oracle(cfg, eff);
        if (name == "fit") return cmd_fit(cfg, eff);
        fail("unknown command '" + name + "'");
    } catch (const ToleranceFailure& e) {
        std::cerr << "tolerance failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace spindrive
