#include "debias/stats.hpp"

#include "debias/errors.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace debias {

std::size_t ContingencyTable::class_index(const std::string& cls) const {
    auto it = class_index_.find(cls);
    if (it == class_index_.end()) {
        throw ValidationError("unknown class \"" + cls + "\"");
    }
    return it->second;
}

std::size_t ContingencyTable::attr_index(const std::string& attr) const {
    auto it = attr_index_.find(attr);
    if (it == attr_index_.end()) {
        throw ValidationError("unknown attribute \"" + attr + "\"");
    }
    return it->second;
}

bool ContingencyTable::has_attribute(const std::string& attr) const {
    return attr_index_.count(attr) > 0;
}

std::int64_t ContingencyTable::class_size(const std::string& cls) const {
    return class_sizes_[class_index(cls)];
}

std::int64_t ContingencyTable::attr_total(const std::string& attr) const {
    return attr_totals_[attr_index(attr)];
}

std::int64_t ContingencyTable::count(const std::string& cls, const std::string& attr) const {
    return counts_[class_index(cls)][attr_index(attr)];
}

void ContingencyTable::validate() const {
    std::int64_t n_sum = 0;
    for (std::size_t ci = 0; ci < class_names_.size(); ++ci) {
        if (class_sizes_[ci] < 1) {
            throw ValidationError("class \"" + class_names_[ci] + "\" has no samples");
        }
        n_sum += class_sizes_[ci];
    }
    if (n_sum != total_) {
        throw ValidationError("contingency table: class sizes do not sum to total");
    }
    for (std::size_t ai = 0; ai < attr_names_.size(); ++ai) {
        std::int64_t m = 0;
        for (std::size_t ci = 0; ci < class_names_.size(); ++ci) {
            std::int64_t n = counts_[ci][ai];
            if (n < 0 || n > class_sizes_[ci]) {
                throw ValidationError("contingency table: count out of range for (" +
                                      class_names_[ci] + ", " + attr_names_[ai] + ")");
            }
            m += n;
        }
        if (m != attr_totals_[ai]) {
            throw ValidationError("contingency table: attribute totals inconsistent for \"" +
                                  attr_names_[ai] + "\"");
        }
        if (m < 1) {
            throw ValidationError("contingency table: attribute \"" + attr_names_[ai] +
                                  "\" occurs nowhere");
        }
    }
}

ContingencyTable ContingencyTable::from_counts(std::vector<std::string> classes,
                                               std::vector<std::int64_t> class_sizes,
                                               std::vector<std::string> attributes,
                                               std::vector<std::vector<std::int64_t>> counts) {
    if (classes.empty() || classes.size() != class_sizes.size() ||
        counts.size() != classes.size()) {
        throw ValidationError("contingency table: inconsistent construction shapes");
    }
    // Reorder attribute columns into sorted order.
    std::vector<std::size_t> order(attributes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return attributes[a] < attributes[b];
    });

    ContingencyTable t;
    t.class_names_ = std::move(classes);
    t.class_sizes_ = std::move(class_sizes);
    for (std::size_t ci = 0; ci < t.class_names_.size(); ++ci) {
        if (!t.class_index_.emplace(t.class_names_[ci], ci).second) {
            throw ValidationError("contingency table: duplicate class \"" + t.class_names_[ci] + "\"");
        }
        t.total_ += t.class_sizes_[ci];
    }
    t.attr_names_.reserve(attributes.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const std::string& name = attributes[order[k]];
        if (!t.attr_index_.emplace(name, k).second) {
            throw ValidationError("contingency table: duplicate attribute \"" + name + "\"");
        }
        t.attr_names_.push_back(name);
    }
    t.counts_.assign(t.class_names_.size(), std::vector<std::int64_t>(t.attr_names_.size(), 0));
    t.attr_totals_.assign(t.attr_names_.size(), 0);
    for (std::size_t ci = 0; ci < t.class_names_.size(); ++ci) {
        if (counts[ci].size() != attributes.size()) {
            throw ValidationError("contingency table: ragged count rows");
        }
        for (std::size_t k = 0; k < order.size(); ++k) {
            std::int64_t n = counts[ci][order[k]];
            t.counts_[ci][k] = n;
            t.attr_totals_[k] += n;
        }
    }
    t.validate();
    return t;
}

namespace {

using PartialCounts = std::unordered_map<std::string, std::vector<std::int64_t>>;

void count_range(const Corpus& corpus,
                 const std::unordered_map<std::string, std::size_t>& class_index,
                 std::size_t begin, std::size_t end, PartialCounts& out) {
    const std::size_t n_classes = class_index.size();
    for (std::size_t i = begin; i < end; ++i) {
        const SampleRecord& r = corpus.records[i];
        const std::size_t ci = class_index.at(r.class_label);
        for (const std::string& tag : r.tags) {
            auto [it, inserted] = out.try_emplace(tag);
            if (inserted) it->second.assign(n_classes, 0);
            it->second[ci] += 1;
        }
    }
}

} // namespace

ContingencyTable ContingencyTable::from_corpus(const Corpus& corpus, unsigned threads) {
    if (corpus.records.empty()) {
        throw ValidationError("cannot build contingency table from empty corpus");
    }
    ContingencyTable t;
    t.class_names_ = corpus.class_set;
    for (std::size_t ci = 0; ci < t.class_names_.size(); ++ci) {
        t.class_index_.emplace(t.class_names_[ci], ci);
    }
    t.class_sizes_.assign(t.class_names_.size(), 0);
    for (const SampleRecord& r : corpus.records) {
        t.class_sizes_[t.class_index_.at(r.class_label)] += 1;
    }
    t.total_ = static_cast<std::int64_t>(corpus.records.size());

    if (threads == 0) threads = 1;
    threads = std::min<unsigned>(threads, std::max<std::size_t>(std::size_t{1},
                                 corpus.records.size() / 1024 + 1));

    PartialCounts merged;
    if (threads <= 1) {
        count_range(corpus, t.class_index_, 0, corpus.records.size(), merged);
    } else {
        std::vector<PartialCounts> partials(threads);
        std::vector<std::thread> workers;
        const std::size_t chunk = (corpus.records.size() + threads - 1) / threads;
        for (unsigned w = 0; w < threads; ++w) {
            const std::size_t begin = std::min<std::size_t>(w * chunk, corpus.records.size());
            const std::size_t end = std::min<std::size_t>(begin + chunk, corpus.records.size());
            workers.emplace_back([&, begin, end, w] {
                count_range(corpus, t.class_index_, begin, end, partials[w]);
            });
        }
        for (std::thread& w : workers) w.join();
        // Associative merge; final ordering below makes the result
        // independent of the partition.
        for (PartialCounts& p : partials) {
            for (auto& [attr, row] : p) {
                auto [it, inserted] = merged.try_emplace(attr);
                if (inserted) {
                    it->second = std::move(row);
                } else {
                    for (std::size_t ci = 0; ci < row.size(); ++ci) it->second[ci] += row[ci];
                }
            }
        }
    }

    t.attr_names_.reserve(merged.size());
    for (const auto& [attr, row] : merged) t.attr_names_.push_back(attr);
    std::sort(t.attr_names_.begin(), t.attr_names_.end());
    t.counts_.assign(t.class_names_.size(), std::vector<std::int64_t>(t.attr_names_.size(), 0));
    t.attr_totals_.assign(t.attr_names_.size(), 0);
    for (std::size_t ai = 0; ai < t.attr_names_.size(); ++ai) {
        t.attr_index_.emplace(t.attr_names_[ai], ai);
        const std::vector<std::int64_t>& row = merged.at(t.attr_names_[ai]);
        std::int64_t m = 0;
        for (std::size_t ci = 0; ci < t.class_names_.size(); ++ci) {
            t.counts_[ci][ai] = row[ci];
            m += row[ci];
        }
        t.attr_totals_[ai] = m;
    }
    t.validate();
    return t;
}

ContingencyTable build_table(const Corpus& corpus, unsigned threads) {
    return ContingencyTable::from_corpus(corpus, threads);
}

double cond_prob(const ContingencyTable& t, const std::string& cls, const std::string& attr) {
    const std::size_t ci = t.class_index(cls);
    const std::size_t ai = t.attr_index(attr);
    return static_cast<double>(t.count_at(ci, ai)) / static_cast<double>(t.attr_total_at(ai));
}

double marginal(const ContingencyTable& t, const std::string& cls) {
    const std::size_t ci = t.class_index(cls);
    return static_cast<double>(t.class_size_at(ci)) / static_cast<double>(t.total());
}

bool is_dependent_at(const ContingencyTable& t, std::size_t ci, std::size_t ai) {
    const auto n = static_cast<__int128>(t.count_at(ci, ai));
    const auto n_c = static_cast<__int128>(t.class_size_at(ci));
    const auto m = static_cast<__int128>(t.attr_total_at(ai));
    const auto total = static_cast<__int128>(t.total());
    return n * total > n_c * m;
}

bool is_dependent(const ContingencyTable& t, const std::string& cls, const std::string& attr) {
    return is_dependent_at(t, t.class_index(cls), t.attr_index(attr));
}

IndicatorJoint joint_at(const ContingencyTable& t, std::size_t ci, std::size_t ai) {
    const std::int64_t n = t.count_at(ci, ai);
    const std::int64_t n_c = t.class_size_at(ci);
    const std::int64_t m = t.attr_total_at(ai);
    const std::int64_t total = t.total();
    const double d = static_cast<double>(total);
    IndicatorJoint p;
    p.p11 = static_cast<double>(n) / d;
    p.p10 = static_cast<double>(n_c - n) / d;
    p.p01 = static_cast<double>(m - n) / d;
    p.p00 = static_cast<double>(total - n_c - m + n) / d;
    return p;
}

IndicatorJoint joint(const ContingencyTable& t, const std::string& cls, const std::string& attr) {
    return joint_at(t, t.class_index(cls), t.attr_index(attr));
}

double binary_entropy_bits(double p) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

double mutual_information_at(const ContingencyTable& t, std::size_t ci, std::size_t ai) {
    const std::int64_t n = t.count_at(ci, ai);
    const std::int64_t n_c = t.class_size_at(ci);
    const std::int64_t m = t.attr_total_at(ai);
    const std::int64_t total = t.total();
    const double d = static_cast<double>(total);

    // All cells and marginals come from integer counts so that the two
    // classes of a binary problem see exactly the same set of doubles.
    const double cells[4] = {
        static_cast<double>(n) / d,                  // z=1, w=1
        static_cast<double>(n_c - n) / d,            // z=1, w=0
        static_cast<double>(m - n) / d,              // z=0, w=1
        static_cast<double>(total - n_c - m + n) / d // z=0, w=0
    };
    const double pz[2] = {static_cast<double>(n_c) / d, static_cast<double>(total - n_c) / d};
    const double pw[2] = {static_cast<double>(m) / d, static_cast<double>(total - m) / d};

    double terms[4];
    int n_terms = 0;
    const int z_of[4] = {0, 0, 1, 1};
    const int w_of[4] = {0, 1, 0, 1};
    for (int k = 0; k < 4; ++k) {
        const double p = cells[k];
        if (p <= 0.0) continue;
        terms[n_terms++] = p * std::log2(p / (pz[z_of[k]] * pw[w_of[k]]));
    }
    std::sort(terms, terms + n_terms);
    double mi = 0.0;
    for (int k = 0; k < n_terms; ++k) mi += terms[k];
    return mi < 0.0 ? 0.0 : mi;
}

double mutual_information(const ContingencyTable& t, const std::string& cls,
                          const std::string& attr) {
    return mutual_information_at(t, t.class_index(cls), t.attr_index(attr));
}

} // namespace debias
