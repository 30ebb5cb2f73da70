#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "spindrive/fit.hpp"
#include "spindrive/model.hpp"
#include "spindrive/numerics.hpp"
#include "spindrive/sequence.hpp"

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

}  // namespace

TEST_SUITE("sequence") {

TEST_CASE("refocusing blocks sum to zero net rotation") {
    const PulseBlock r3 = build_r3(kPi);
    REQUIRE(r3.flips.size() == 3);
    CHECK(r3.flips[0] == kPi);
    CHECK(r3.flips[1] == -2.0 * kPi);
    CHECK(r3.flips[2] == kPi);
    CHECK(r3.flips[0] + r3.flips[1] + r3.flips[2] == 0.0);

    const PulseBlock r2 = build_r2(kPi);
    REQUIRE(r2.flips.size() == 2);
    CHECK(r2.flips[0] == kPi);
    CHECK(r2.flips[1] == -kPi);
    CHECK(r2.flips[0] + r2.flips[1] == 0.0);
}

TEST_CASE("standard supercycle layout") {
    const Supercycle s = supercycle_s();
    CHECK(s.entries.size() == 8);
    CHECK(s.pulse_count() == 24);
    CHECK(print_sequence(s) == "R3 ~R3 ~R3 R3 ~R3 R3 R3 ~R3");
    // 8 blocks of total flip 4*pi each.
    const double w1 = kTwoPi * 10e3;
    CHECK(rel_close(s.period(w1), 32.0 * kPi / w1, 1e-14));
    CHECK(rel_close(s.period(w1), 1.6e-3, 1e-14));
    // Signed flips cancel across the whole expansion.
    double total = 0.0;
    for (const auto& e : s.entries)
        for (double f : block_for_entry(e).flips) total += f;
    CHECK(total == 0.0);
}

TEST_CASE("parser handles grouping, repetition, and inversion") {
    CHECK(print_sequence(parse_sequence("(R3)1")) == "R3");
    CHECK(print_sequence(parse_sequence("~(~R3)")) == "R3");
    CHECK(print_sequence(parse_sequence("(R2 R3)2")) == "R2 R3 R2 R3");
    CHECK(print_sequence(parse_sequence("(R2)3")) == "R2 R2 R2");
    CHECK(print_sequence(parse_sequence("~((R3)2 R2)")) == "~R3 ~R3 ~R2");
}

TEST_CASE("printed form reparses to the same cycle") {
    const std::string text = print_sequence(supercycle_s());
    const Supercycle back = parse_sequence(text);
    CHECK(print_sequence(back) == text);
    CHECK(back.pulse_count() == 24);
}

TEST_CASE("parse errors carry a character position") {
    for (const char* bad : {"R4", "", "(R3", "R3)", "(R3)0", "~"}) {
        const std::string msg = thrown_message([&] { parse_sequence(bad); });
        CHECK_MESSAGE(msg.find("sequence parse error at position") != std::string::npos,
                      "input: \"", bad, "\" message: ", msg);
    }
    CHECK(thrown_message([] { parse_sequence("R4"); }).find("position 1") !=
          std::string::npos);
}

TEST_CASE("program expansion keeps nominal durations under miscalibration") {
    const double w1 = kTwoPi * 10e3;
    const Supercycle r3 = parse_sequence("R3");

    const DriveProgram nominal = expand_to_program(r3, w1, 1.0);
    REQUIRE(nominal.segments.size() == 3);
    CHECK(nominal.segments[0].duration == kPi / w1);
    CHECK(nominal.segments[1].duration == 2.0 * kPi / w1);
    CHECK(nominal.segments[2].duration == kPi / w1);
    CHECK(nominal.segments[0].amplitude == w1);
    CHECK(nominal.segments[1].amplitude == -w1);
    CHECK(nominal.segments[2].amplitude == w1);
    CHECK(nominal.segments[0].offset == 0.0);

    const DriveProgram scaled = expand_to_program(r3, w1, 1.05);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(scaled.segments[i].duration == nominal.segments[i].duration);
        CHECK(scaled.segments[i].amplitude == 1.05 * nominal.segments[i].amplitude);
    }
    CHECK(scaled.total_duration == nominal.total_duration);
}

TEST_CASE("inhomogeneity ensembles are normalized and symmetric") {
    const InhomogeneitySpec none = inh_none();
    REQUIRE(none.points.size() == 1);
    CHECK(none.points[0].scale == 1.0);
    CHECK(none.points[0].weight == 1.0);

    const InhomogeneitySpec single = inh_uniform(0.05, 1);
    REQUIRE(single.points.size() == 1);
    CHECK(single.points[0].scale == 1.0);
    CHECK(single.points[0].weight == 1.0);

    const InhomogeneitySpec uni = inh_uniform(0.05, 5);
    REQUIRE(uni.points.size() == 5);
    CHECK(rel_close(uni.points[0].scale, 0.95, 1e-12));
    CHECK(rel_close(uni.points[2].scale, 1.0, 1e-12));
    CHECK(rel_close(uni.points[4].scale, 1.05, 1e-12));
    double sum = 0.0;
    for (const auto& pt : uni.points) {
        CHECK(rel_close(pt.weight, 0.2, 1e-12));
        sum += pt.weight;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);

    // Layout: center node first, then +/- pairs of growing offset.
    const InhomogeneitySpec gh = inh_gauss_hermite7(0.02);
    REQUIRE(gh.points.size() == 7);
    double gh_sum = 0.0, mean = 0.0;
    for (const auto& pt : gh.points) {
        gh_sum += pt.weight;
        mean += pt.weight * pt.scale;
    }
    CHECK(std::fabs(gh_sum - 1.0) < 1e-12);
    CHECK(std::fabs(mean - 1.0) < 1e-12);
    CHECK(gh.points[0].scale == 1.0);
    CHECK(gh.points[0].weight > 0.4);
    CHECK(gh.points[0].weight < 0.5);
    for (int k = 0; k < 3; ++k) {
        const auto& lo = gh.points[1 + 2 * k];
        const auto& hi = gh.points[2 + 2 * k];
        CHECK(std::fabs(lo.scale + hi.scale - 2.0) < 1e-12);
        CHECK(lo.scale < 1.0);
        CHECK(hi.scale > 1.0);
        CHECK(lo.weight == hi.weight);
        CHECK(lo.weight < gh.points[0].weight);
        if (k > 0) CHECK(lo.scale < gh.points[2 * k - 1].scale);  // offsets grow
    }
    // Wider sigma spreads the nodes proportionally.
    const InhomogeneitySpec gh2 = inh_gauss_hermite7(0.04);
    CHECK(rel_close(gh2.points[1].scale - 1.0, 2.0 * (gh.points[1].scale - 1.0), 1e-12));
    CHECK_NOTHROW(validate_inhomogeneity(gh));
}

TEST_CASE("inhomogeneity validation rejects bad ensembles") {
    CHECK(thrown_message([] { inh_uniform(0.05, 0); })
              .find("inh_uniform: need at least 1 point") != std::string::npos);
    InhomogeneitySpec lopsided{{{1.0, 0.5}, {1.1, 0.2}}};
    CHECK(thrown_message([&] { validate_inhomogeneity(lopsided); })
              .find("inhomogeneity weights must sum to 1") != std::string::npos);
    InhomogeneitySpec negative{{{-1.0, 0.5}, {1.0, 0.5}}};
    CHECK_THROWS_AS(validate_inhomogeneity(negative), std::exception);
}

TEST_CASE("one dissipation-free supercycle returns to +z for any drive scale") {
    const double w1 = kTwoPi * 10e3;
    const SpinSystemParams p =
        make_params_tau(kTwoPi * 20e3, w1, kTwoPi * 20e3, 1e-300, kInf, kInf);
    for (double scale : {1.0, 0.93}) {
        InhomogeneitySpec inh{{{scale, 1.0}}};
        const DecaySeries s =
            simulate_refocused_nutation(p, supercycle_s(), inh, {1}, 0.04 / w1);
        REQUIRE(s.points.size() == 1);
        CHECK(std::fabs(s.points[0].mz - 1.0) < 1e-6);
        CHECK(std::fabs(s.points[0].my_leakage) < 1e-6);
    }
}

TEST_CASE("decay series carries counts, times, and the cycle period") {
    const double w1 = kTwoPi * 10e3;
    const SpinSystemParams p =
        make_params_tau(kTwoPi * 20e3, w1, kTwoPi * 20e3, 1.32e-11, 1.34, 0.81);
    const std::vector<int> n_values = {1, 6, 11};
    const DecaySeries s =
        simulate_refocused_nutation(p, supercycle_s(), inh_none(), n_values, 0.05 / w1);
    REQUIRE(s.points.size() == 3);
    CHECK(rel_close(s.period, 1.6e-3, 1e-12));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(s.points[i].n == n_values[i]);
        CHECK(s.points[i].t == s.points[i].n * s.period);
    }
    CHECK(s.points[0].mz > s.points[1].mz);
    CHECK(s.points[1].mz > s.points[2].mz);
    CHECK(s.points[2].mz > 0.0);
}

TEST_CASE("ensemble average is the weighted mean of member runs") {
    const double w1 = kTwoPi * 10e3, step = 0.045 / w1;
    const SpinSystemParams p =
        make_params_tau(kTwoPi * 20e3, w1, kTwoPi * 20e3, 1.32e-11, 1.34, 0.81);
    const Supercycle sc = supercycle_s();
    const std::vector<int> n_values = {1, 4};

    const DecaySeries lo =
        simulate_refocused_nutation(p, sc, InhomogeneitySpec{{{0.9, 1.0}}}, n_values, step);
    const DecaySeries hi =
        simulate_refocused_nutation(p, sc, InhomogeneitySpec{{{1.1, 1.0}}}, n_values, step);
    const DecaySeries both = simulate_refocused_nutation(
        p, sc, InhomogeneitySpec{{{0.9, 0.5}, {1.1, 0.5}}}, n_values, step);

    for (std::size_t i = 0; i < n_values.size(); ++i) {
        CHECK(rel_close(both.points[i].mz,
                        0.5 * lo.points[i].mz + 0.5 * hi.points[i].mz, 1e-12));
        CHECK(std::fabs(both.points[i].my_leakage -
                        (0.5 * lo.points[i].my_leakage + 0.5 * hi.points[i].my_leakage)) <
              1e-12);
    }
}

TEST_CASE("sample counts must be strictly increasing") {
    const double w1 = kTwoPi * 10e3;
    const SpinSystemParams p =
        make_params_tau(kTwoPi * 20e3, w1, kTwoPi * 20e3, 1.32e-11, 1.34, 0.81);
    CHECK(thrown_message([&] {
              simulate_refocused_nutation(p, supercycle_s(), inh_none(), {5, 5}, 0.05 / w1);
          }).find("n values must be strictly increasing") != std::string::npos);
    CHECK_THROWS_AS(
        simulate_refocused_nutation(p, supercycle_s(), inh_none(), {0, 1}, 0.05 / w1),
        std::exception);
}

TEST_CASE("refocused decay rate tracks the damping model under inhomogeneity") {
    // The fitted R_z should match a1 + omega1^2*tau_c even with a 2% drive
    // spread, since the supercycle cancels flip-angle errors.
    const double w1 = kTwoPi * 20e3;
    const SpinSystemParams p = make_params_tau(kTwoPi * 60285963292.38459, w1,
                                               kTwoPi * 60285963292.38459, 1.32e-11,
                                               1.34, 0.81);
    std::vector<int> n_values;
    for (int n = 1; n <= 121; n += 5) n_values.push_back(n);
    const DecaySeries s = simulate_refocused_nutation(
        p, supercycle_s(), inh_uniform(0.02, 7), n_values, 0.04 / (w1 * 1.02));
    for (std::size_t i = 1; i < s.points.size(); ++i)
        CHECK(s.points[i].mz <= s.points[i - 1].mz);
    const RateFit fit = fit_decay_rate(s, AsymptoteMode::RawLog);
    const double expected =
        (p.T1 + p.T2) / (2.0 * p.T1 * p.T2) + w1 * w1 * p.tau_c;
    CHECK(rel_close(fit.rate, expected, 0.05));
    CHECK(rel_close(fit.rate, 1.200432, 1e-4));
}

TEST_CASE("transverse leakage ratio is small and negative") {
    const SpinSystemParams p = make_params_tau(kTwoPi * 20e3, kTwoPi * 10e3,
                                               kTwoPi * 20e3, 1.32e-11, 1.34, 0.81);
    CHECK(rel_close(leakage_ratio(p), -5.408e-5, 1e-3));
}

TEST_CASE("leakage ratio vanishes from below as the drive strengthens") {
    // With relaxation-dominated damping the ratio scales as -1/omega1.
    double prev = -1.0;
    for (double nu : {10e3, 100e3, 1e6}) {
        const SpinSystemParams p = make_params_tau(kTwoPi * 20e3, kTwoPi * nu,
                                                   kTwoPi * 20e3, 1e-300, 1.34, 0.81);
        const double lr = leakage_ratio(p);
        CHECK(lr < 0.0);
        CHECK(lr > prev);
        prev = lr;
    }
}

}  // TEST_SUITE
