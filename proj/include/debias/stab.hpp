#pragma once

#include "debias/stats.hpp"

#include <optional>
#include <string>
#include <vector>

namespace debias {

enum class DetectMode { dependence_only, mi_only, both };

const char* to_string(DetectMode m);
DetectMode detect_mode_from_string(const std::string& s);

/// An exclusion rule: drop `attribute` from the candidate list of
/// `class_label`, or of every class when class_label is empty.
struct Exclusion {
    std::string class_label;  // empty = all classes
    std::string attribute;

    bool operator==(const Exclusion&) const = default;
};

struct BiasCandidate {
    std::string attribute;
    std::int64_t count = 0;   // n^c(a)
    double p_cond = 0.0;      // P(Z_c=1 | W_a=1)
    double p_marg = 0.0;      // P(Z_c=1)
    bool dependent = false;
    double mi_bits = 0.0;

    bool operator==(const BiasCandidate&) const = default;
};

struct ClassDetection {
    // Detected bias attributes, best first. Empty means no eligible
    // attribute; detect() fills at most one, detect_multi() up to k_bias.
    std::vector<std::string> chosen;
    std::vector<BiasCandidate> ranked;
    int k = 0;

    bool operator==(const ClassDetection&) const = default;
};

struct BiasReport {
    DetectMode mode = DetectMode::both;
    bool multi = false;
    std::vector<Exclusion> exclusions;
    std::vector<std::pair<std::string, ClassDetection>> per_class;  // corpus class order

    const ClassDetection* find_class(const std::string& cls) const;
    // Top detected bias for a class, if any.
    std::optional<std::string> chosen_bias(const std::string& cls) const;

    bool operator==(const BiasReport&) const = default;
};

/// Per-class detection. Attributes equal (after case folding) to the
/// class label itself are always dropped; `exclusions` extends that.
/// Candidates with attr_total below min_support are pre-filtered.
BiasReport detect(const ContingencyTable& table, DetectMode mode,
                  const std::vector<Exclusion>& exclusions, int k,
                  std::int64_t min_support = 1);

/// detect(mode=both) generalized to the top k_bias eligible attributes
/// per class. ranked_k controls the length of the ranked list (defaults
/// to max(k_bias, 3)).
BiasReport detect_multi(const ContingencyTable& table,
                        const std::vector<Exclusion>& exclusions, int k_bias,
                        int ranked_k = 0, std::int64_t min_support = 1);

std::string report_to_json(const BiasReport& report);
BiasReport report_from_json(const std::string& bytes);
BiasReport load_report(const std::filesystem::path& path);
void write_report(const BiasReport& report, const std::filesystem::path& path);

} // namespace debias
