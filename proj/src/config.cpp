#include "spindrive/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "spindrive/numerics.hpp"

namespace spindrive {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Fixed schema: section -> allowed keys. Anything else is rejected at load.
const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"model",
         {"larmor_hz", "drive_hz", "omega1_hz", "tau_c", "kappa", "t1", "t2", "m0", "gamma"}},
        {"integrator",
         {"step", "step_fraction", "duration", "trajectory", "trajectory_stride"}},
        {"sequence", {"text", "file"}},
        {"inhomogeneity", {"kind", "sigma", "width", "points"}},
        {"sweep",
         {"n_start", "n_stop", "n_step", "omega1_start_hz", "omega1_stop_hz", "omega1_step_hz",
          "max_drive_time"}},
        {"noise", {"measurement_sigma", "seed"}},
        {"fit", {"asymptote_mode", "input"}},
        {"oracle",
         {"checks", "corrupt_kernel", "n_traj", "kernel_tol_se", "rate_tol_rel", "cross_tol",
          "gamma_tol_rel", "hilbert_tol_rel", "quad_points"}},
    };
    return s;
}

double parse_double(const std::string& v, const std::string& where) {
    const std::string t = trim(v);
    if (t.empty()) fail("config " + where + ": empty numeric value");
    char* end = nullptr;
    const double x = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size())
        fail("config " + where + ": cannot parse '" + t + "' as a number");
    return x;
}

long parse_int(const std::string& v, const std::string& where) {
    const std::string t = trim(v);
    if (t.empty()) fail("config " + where + ": empty integer value");
    char* end = nullptr;
    const long x = std::strtol(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size())
        fail("config " + where + ": cannot parse '" + t + "' as an integer");
    return x;
}

bool parse_bool(const std::string& v, const std::string& where) {
    const std::string t = trim(v);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    fail("config " + where + ": cannot parse '" + t + "' as a boolean (true/false)");
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text,
                                               const std::string& origin) {
    ExperimentConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (t[0] == '[') {
            if (t.back() != ']') fail("config " + where + ": malformed section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) fail("config " + where + ": empty section name");
            if (schema().find(section) == schema().end())
                fail("config " + where + ": unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            fail("config " + where + ": expected 'key = value' or '[section]'");
        if (section.empty()) fail("config " + where + ": key outside any section");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) fail("config " + where + ": empty key");
        if (value.empty()) fail("config " + where + ": empty value for key '" + key + "'");
        const auto& allowed = schema().at(section);
        if (allowed.find(key) == allowed.end())
            fail("config " + where + ": unknown key '" + key + "' in section [" + section + "]");
        auto& sec = cfg.kv_[section];
        if (sec.count(key)) fail("config " + where + ": duplicate key '" + key + "'");
        sec[key] = value;
    }
    // Physical parameters are checked as soon as the file is loaded so bad
    // configs fail before any work starts. Sweep-style configs omit
    // omega1_hz (the sweep supplies it), so validate those at amplitude 0.
    if (cfg.kv_.count("model")) {
        if (cfg.has("model", "omega1_hz"))
            cfg.build_params();
        else
            cfg.build_params_with_omega1(0.0);
    }
    return cfg;
}

bool ExperimentConfig::has(const std::string& section, const std::string& key) const {
    auto it = kv_.find(section);
    return it != kv_.end() && it->second.count(key) > 0;
}

const std::string& ExperimentConfig::get_string(const std::string& section,
                                                const std::string& key) const {
    auto it = kv_.find(section);
    if (it == kv_.end() || !it->second.count(key))
        fail("config " + origin_ + ": missing required key '" + key + "' in section [" +
             section + "]");
    return it->second.at(key);
}

std::string ExperimentConfig::get_string_or(const std::string& section, const std::string& key,
                                            const std::string& fallback) const {
    return has(section, key) ? get_string(section, key) : fallback;
}

double ExperimentConfig::get_double(const std::string& section, const std::string& key) const {
    return parse_double(get_string(section, key), "[" + section + "]." + key);
}

double ExperimentConfig::get_double_or(const std::string& section, const std::string& key,
                                       double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

long ExperimentConfig::get_int(const std::string& section, const std::string& key) const {
    return parse_int(get_string(section, key), "[" + section + "]." + key);
}

long ExperimentConfig::get_int_or(const std::string& section, const std::string& key,
                                  long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

bool ExperimentConfig::get_bool_or(const std::string& section, const std::string& key,
                                   bool fallback) const {
    if (!has(section, key)) return fallback;
    return parse_bool(get_string(section, key), "[" + section + "]." + key);
}

std::string ExperimentConfig::canonical_text() const {
    std::string out;
    for (const auto& [section, entries] : kv_)
        for (const auto& [key, value] : entries)
            out += section + "." + key + "=" + value + "\n";
    return out;
}

std::uint64_t ExperimentConfig::hash_with_seed(std::uint64_t seed) const {
    return fnv1a64(canonical_text() + "cli.seed=" + std::to_string(seed) + "\n");
}

SpinSystemParams ExperimentConfig::build_params() const {
    const double nu1 = get_double("model", "omega1_hz");
    return build_params_with_omega1(kTwoPi * nu1);
}

SpinSystemParams ExperimentConfig::build_params_with_omega1(double omega1_rad) const {
    const double nu0 = get_double("model", "larmor_hz");
    const double nu = get_double_or("model", "drive_hz", nu0);
    const double t1 = get_double("model", "t1");
    const double t2 = get_double("model", "t2");
    const double m0 = get_double_or("model", "m0", 1.0);
    const double gyro = get_double_or("model", "gamma", 2.6752218744e8);

    const bool has_tau = has("model", "tau_c");
    const bool has_kappa = has("model", "kappa");
    if (has_tau == has_kappa)
        fail("config " + origin_ + ": [model] needs exactly one of tau_c or kappa");

    try {
        if (has_tau)
            return make_params_tau(kTwoPi * nu0, omega1_rad, kTwoPi * nu, get_double("model", "tau_c"),
                                   t1, t2, m0, gyro);
        return make_params_kappa(kTwoPi * nu0, omega1_rad, kTwoPi * nu, get_double("model", "kappa"),
                                 t1, t2, m0, gyro);
    } catch (const std::invalid_argument& e) {
        fail("config " + origin_ + " [model]: " + e.what());
    }
}

}  // namespace spindrive
