// INI-style experiment configuration: sectioned key=value files with a fixed
// schema (unknown keys rejected), typed accessors, Hz -> rad/s conversion at
// the boundary, and a content hash embedded in every output for provenance.
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "spindrive/model.hpp"

namespace spindrive {

// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(const std::string& bytes);

class ExperimentConfig {
  public:
    static ExperimentConfig load_file(const std::string& path);
    // Parses config text directly; `origin` only labels error messages.
    static ExperimentConfig from_string(const std::string& text,
                                        const std::string& origin = "<string>");

    bool has(const std::string& section, const std::string& key) const;
    const std::string& get_string(const std::string& section, const std::string& key) const;
    std::string get_string_or(const std::string& section, const std::string& key,
                              const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    long get_int(const std::string& section, const std::string& key) const;
    long get_int_or(const std::string& section, const std::string& key, long fallback) const;
    bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;

    // Sorted "section.key=value" lines; the basis of the config hash, so two
    // files with the same effective content hash identically.
    std::string canonical_text() const;
    // Hash of canonical_text plus the effective seed, so outputs produced
    // with different seeds are distinguishable.
    std::uint64_t hash_with_seed(std::uint64_t seed) const;

    // Builds spin-system parameters from [model]. Frequencies are given in
    // Hz in the file and converted by exactly 2*pi here. Exactly one of
    // tau_c / kappa must be present; t1/t2 accept "inf".
    SpinSystemParams build_params() const;
    // Same, but with the drive amplitude replaced (rad/s); used by sweeps.
    SpinSystemParams build_params_with_omega1(double omega1_rad) const;

  private:
    std::map<std::string, std::map<std::string, std::string>> kv_;
    std::string origin_;
};

}  // namespace spindrive
