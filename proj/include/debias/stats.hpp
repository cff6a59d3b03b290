#pragma once

#include "debias/corpus.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace debias {

/// Joint distribution of the class indicator Z_c and the attribute
/// indicator W_a: p_zw = P(Z=z, W=w).
struct IndicatorJoint {
    double p11 = 0.0;
    double p10 = 0.0;
    double p01 = 0.0;
    double p00 = 0.0;
};

/// Per-(class, attribute) occurrence counts with class and attribute
/// marginals. Classes keep corpus first-appearance order; attributes are
/// stored sorted so parallel construction yields an identical table.
class ContingencyTable {
public:
    static ContingencyTable from_corpus(const Corpus& corpus, unsigned threads = 1);
    // Direct construction from raw counts; counts[class][attr].
    static ContingencyTable from_counts(std::vector<std::string> classes,
                                        std::vector<std::int64_t> class_sizes,
                                        std::vector<std::string> attributes,
                                        std::vector<std::vector<std::int64_t>> counts);

    std::int64_t total() const { return total_; }
    const std::vector<std::string>& classes() const { return class_names_; }
    const std::vector<std::string>& attributes() const { return attr_names_; }

    std::size_t class_index(const std::string& cls) const;  // throws on unknown
    std::size_t attr_index(const std::string& attr) const;  // throws on unknown
    bool has_attribute(const std::string& attr) const;

    std::int64_t class_size_at(std::size_t ci) const { return class_sizes_[ci]; }
    std::int64_t attr_total_at(std::size_t ai) const { return attr_totals_[ai]; }
    std::int64_t count_at(std::size_t ci, std::size_t ai) const {
        return counts_[ci][ai];
    }

    std::int64_t class_size(const std::string& cls) const;
    std::int64_t attr_total(const std::string& attr) const;
    std::int64_t count(const std::string& cls, const std::string& attr) const;

private:
    void validate() const;

    std::vector<std::string> class_names_;
    std::vector<std::string> attr_names_;
    std::unordered_map<std::string, std::size_t> class_index_;
    std::unordered_map<std::string, std::size_t> attr_index_;
    std::vector<std::vector<std::int64_t>> counts_;  // [class][attr]
    std::vector<std::int64_t> class_sizes_;
    std::vector<std::int64_t> attr_totals_;
    std::int64_t total_ = 0;
};

ContingencyTable build_table(const Corpus& corpus, unsigned threads = 1);

// P(Z_c = 1 | W_a = 1) = n_c(a) / m(a).
double cond_prob(const ContingencyTable& t, const std::string& cls, const std::string& attr);

// P(Z_c = 1) = N_c / N.
double marginal(const ContingencyTable& t, const std::string& cls);

// Strict dependence test P(Z_c=1|W_a=1) > P(Z_c=1), decided by exact
// integer cross-multiplication; no floating point anywhere.
bool is_dependent(const ContingencyTable& t, const std::string& cls, const std::string& attr);
bool is_dependent_at(const ContingencyTable& t, std::size_t ci, std::size_t ai);

IndicatorJoint joint(const ContingencyTable& t, const std::string& cls, const std::string& attr);
IndicatorJoint joint_at(const ContingencyTable& t, std::size_t ci, std::size_t ai);

// MI(Z_c; W_a) in bits, 0*log0 := 0. The four pointwise terms are summed
// in sorted order so algebraically equal tables give bit-identical results
// (e.g. the two classes of a binary problem).
double mutual_information(const ContingencyTable& t, const std::string& cls,
                          const std::string& attr);
double mutual_information_at(const ContingencyTable& t, std::size_t ci, std::size_t ai);

// Binary entropy of probability p, in bits.
double binary_entropy_bits(double p);

} // namespace debias
