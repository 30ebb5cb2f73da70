#include "spindrive/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <stdexcept>

#include "spindrive/numerics.hpp"

namespace spindrive {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

constexpr std::size_t kMaxBlocks = 1u << 20;  // expansion guard

bool known_block(const std::string& name) { return name == "R2" || name == "R3"; }

std::size_t pulses_in(const std::string& name) { return name == "R3" ? 3 : 2; }

// Recursive-descent parser over a flat token-free scan (the grammar is
// simple enough to parse straight off the characters).
struct Parser {
    const std::string& s;
    std::size_t pos = 0;

    explicit Parser(const std::string& text) : s(text) {}

    [[noreturn]] void error(const std::string& what, std::size_t at) {
        fail("sequence parse error at position " + std::to_string(at + 1) + ": " + what);
    }

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    bool at_end() {
        skip_ws();
        return pos >= s.size();
    }

    char peek() { return s[pos]; }

    std::vector<SupercycleEntry> parse_expr(bool inside_group) {
        std::vector<SupercycleEntry> out;
        while (!at_end()) {
            if (peek() == ')') {
                if (inside_group) break;
                error("unmatched ')'", pos);
            }
            auto part = parse_term();
            out.insert(out.end(), part.begin(), part.end());
            if (out.size() > kMaxBlocks) error("sequence expansion too large", pos);
        }
        if (out.empty()) error("empty sequence", pos);
        return out;
    }

    std::vector<SupercycleEntry> parse_term() {
        auto blocks = parse_factor();
        skip_ws();
        if (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            const std::size_t start = pos;
            unsigned long reps = 0;
            while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
                reps = reps * 10 + static_cast<unsigned long>(s[pos] - '0');
                if (reps > kMaxBlocks) error("repetition count too large", start);
                ++pos;
            }
            if (reps == 0) error("repetition count must be >= 1", start);
            std::vector<SupercycleEntry> rep;
            rep.reserve(blocks.size() * reps);
            for (unsigned long r = 0; r < reps; ++r)
                rep.insert(rep.end(), blocks.begin(), blocks.end());
            return rep;
        }
        return blocks;
    }

    std::vector<SupercycleEntry> parse_factor() {
        skip_ws();
        if (pos >= s.size()) error("expected block name, '~', or '('", pos);
        const char c = peek();
        if (c == '~') {
            ++pos;
            auto inner = parse_factor();
            for (auto& e : inner) e.inverted = !e.inverted;
            return inner;
        }
        if (c == '(') {
            const std::size_t open = pos;
            ++pos;
            auto inner = parse_expr(true);
            skip_ws();
            if (pos >= s.size() || peek() != ')') error("unclosed '('", open);
            ++pos;
            return inner;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos;
            std::string name;
            while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos])))
                name.push_back(s[pos++]);
            if (!known_block(name)) error("unknown block name '" + name + "'", start);
            return {SupercycleEntry{name, false}};
        }
        error(std::string("unexpected character '") + c + "'", pos);
    }
};

}  // namespace

PulseBlock build_r3(double theta) {
    if (!(theta > 0.0)) fail("build_r3: theta must be > 0");
    return PulseBlock{{theta, -2.0 * theta, theta}};
}

PulseBlock build_r2(double theta) {
    if (!(theta > 0.0)) fail("build_r2: theta must be > 0");
    return PulseBlock{{theta, -theta}};
}

double Supercycle::period(double omega1) const {
    if (!(omega1 > 0.0)) fail("Supercycle::period: omega1 must be > 0");
    double total_theta = 0.0;
    for (const auto& e : entries) total_theta += (e.name == "R3") ? 4.0 * kPi : 2.0 * kPi;
    return total_theta / omega1;
}

std::size_t Supercycle::pulse_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += pulses_in(e.name);
    return n;
}

Supercycle parse_sequence(const std::string& text) {
    Parser parser(text);
    Supercycle sc;
    sc.entries = parser.parse_expr(false);
    return sc;
}

std::string print_sequence(const Supercycle& sc) {
    std::string out;
    for (std::size_t i = 0; i < sc.entries.size(); ++i) {
        if (i) out.push_back(' ');
        if (sc.entries[i].inverted) out.push_back('~');
        out += sc.entries[i].name;
    }
    return out;
}

Supercycle supercycle_s() { return parse_sequence("R3 ~R3 ~R3 R3 ~R3 R3 R3 ~R3"); }

PulseBlock block_for_entry(const SupercycleEntry& e) {
    if (!known_block(e.name)) fail("block_for_entry: unknown block name '" + e.name + "'");
    PulseBlock b = (e.name == "R3") ? build_r3(kPi) : build_r2(kPi);
    if (e.inverted)
        for (auto& f : b.flips) f = -f;
    return b;
}

InhomogeneitySpec inh_none() { return InhomogeneitySpec{{{1.0, 1.0}}}; }

InhomogeneitySpec inh_gauss_hermite7(double sigma) {
    if (!(sigma >= 0.0)) fail("inh_gauss_hermite7: sigma must be >= 0");
    // 7-node Hermite abscissas/weights for weight function exp(-x^2); the
    // scale for a mean-1, fractional-width-sigma normal is 1 + sigma*sqrt(2)*x.
    static const double node[4] = {0.0, 0.8162878828589646630, 1.6735516287674714450,
                                   2.6519613568352334924};
    static const double wt[4] = {0.8102646175568073, 0.4256072526101278, 0.05451558281912703,
                                 0.0009717812450995192};
    InhomogeneitySpec spec;
    const double c = sigma * std::sqrt(2.0);
    spec.points.push_back({1.0, wt[0]});
    for (int k = 1; k < 4; ++k) {
        spec.points.push_back({1.0 - c * node[k], wt[k]});
        spec.points.push_back({1.0 + c * node[k], wt[k]});
    }
    double total = 0.0;
    for (const auto& pt : spec.points) total += pt.weight;
    for (auto& pt : spec.points) pt.weight /= total;
    validate_inhomogeneity(spec);
    return spec;
}

InhomogeneitySpec inh_uniform(double width, int n) {
    if (!(width >= 0.0)) fail("inh_uniform: width must be >= 0");
    if (n < 1) fail("inh_uniform: need at least 1 point");
    InhomogeneitySpec spec;
    if (n == 1) {
        spec.points.push_back({1.0, 1.0});
    } else {
        for (int k = 0; k < n; ++k) {
            const double x = 2.0 * static_cast<double>(k) / (n - 1) - 1.0;
            spec.points.push_back({1.0 + width * x, 1.0 / n});
        }
    }
    validate_inhomogeneity(spec);
    return spec;
}

void validate_inhomogeneity(const InhomogeneitySpec& inh) {
    if (inh.points.empty()) fail("inhomogeneity spec has no points");
    double total = 0.0;
    for (const auto& pt : inh.points) {
        if (!(pt.scale > 0.0)) fail("inhomogeneity scales must be > 0");
        if (!(pt.weight >= 0.0)) fail("inhomogeneity weights must be >= 0");
        total += pt.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) fail("inhomogeneity weights must sum to 1");
}

DriveProgram expand_to_program(const Supercycle& sc, double omega1, double scale) {
    if (!(omega1 > 0.0)) fail("expand_to_program: omega1 must be > 0");
    if (!(scale > 0.0)) fail("expand_to_program: scale must be > 0");
    std::vector<DriveSegment> segs;
    segs.reserve(sc.pulse_count());
    for (const auto& e : sc.entries) {
        const PulseBlock b = block_for_entry(e);
        for (double f : b.flips) {
            DriveSegment s;
            s.duration = std::abs(f) / omega1;                       // nominal timing
            s.amplitude = (f >= 0.0 ? 1.0 : -1.0) * omega1 * scale;  // actual field
            s.offset = 0.0;
            segs.push_back(s);
        }
    }
    return DriveProgram::from_segments(std::move(segs));
}

DecaySeries simulate_refocused_nutation(const SpinSystemParams& p, const Supercycle& sc,
                                        const InhomogeneitySpec& inh,
                                        const std::vector<int>& n_values, double step) {
    validate(p);
    validate_inhomogeneity(inh);
    if (sc.entries.empty()) fail("simulate_refocused_nutation: empty supercycle");
    if (n_values.empty()) fail("simulate_refocused_nutation: n_values is empty");
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        if (n_values[i] < 1) fail("simulate_refocused_nutation: n values must be >= 1");
        if (i && n_values[i] <= n_values[i - 1])
            fail("simulate_refocused_nutation: n values must be strictly increasing");
    }

    auto members = inh.points;
    std::sort(members.begin(), members.end(),
              [](const InhomogeneityPoint& a, const InhomogeneityPoint& b) {
                  return a.scale < b.scale;
              });

    const int n_max = n_values.back();
    const std::size_t segs_per_cycle = sc.pulse_count();
    const double period = sc.period(p.omega1);

    DecaySeries series;
    series.params = p;
    series.period = period;
    series.points.resize(n_values.size());
    for (std::size_t j = 0; j < n_values.size(); ++j) {
        series.points[j].n = n_values[j];
        series.points[j].t = n_values[j] * period;
    }

    for (const auto& member : members) {
        // One long program of n_max repetitions; boundary samples land at
        // indices k*segs_per_cycle in the trajectory (index 0 = start).
        const DriveProgram one = expand_to_program(sc, p.omega1, member.scale);
        std::vector<DriveSegment> all;
        all.reserve(one.segments.size() * static_cast<std::size_t>(n_max));
        for (int r = 0; r < n_max; ++r)
            all.insert(all.end(), one.segments.begin(), one.segments.end());
        const DriveProgram prog = DriveProgram::from_segments(std::move(all));

        const auto traj = integrate({0.0, 0.0, p.M0, 0.0}, prog, p, step, 0);
        for (std::size_t j = 0; j < n_values.size(); ++j) {
            const std::size_t idx = static_cast<std::size_t>(n_values[j]) * segs_per_cycle;
            series.points[j].mz += member.weight * traj[idx].mz;
            series.points[j].my_leakage += member.weight * traj[idx].my;
        }
    }
    return series;
}

double leakage_ratio(const SpinSystemParams& p) {
    validate(p);
    if (!(p.omega1 > 0.0)) fail("leakage_ratio: omega1 must be > 0");
    const double inv_t1 = std::isinf(p.T1) ? 0.0 : 1.0 / p.T1;
    const double inv_t2 = std::isinf(p.T2) ? 0.0 : 1.0 / p.T2;
    const double arg = kPi * (inv_t1 + inv_t2 + 3.5 * p.omega1 * p.omega1 * p.tau_c) /
                       (2.0 * p.omega1);
    return -std::tanh(arg);
}

}  // namespace spindrive
