#include "debias/builder.hpp"

#include "debias/errors.hpp"
#include "debias/rng.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace debias {

namespace {
constexpr std::uint64_t kSampleDomain = 0x5a3b1edcu;

// Strips a "::be"/"::te" derivation suffix, if any.
std::string source_of(const std::string& edited_id) {
    for (const char* suffix : {"::be", "::te"}) {
        const std::size_t len = 4;
        if (edited_id.size() > len && edited_id.compare(edited_id.size() - len, len, suffix) == 0) {
            return edited_id.substr(0, edited_id.size() - len);
        }
    }
    return edited_id;
}
} // namespace

BuildOutcome build_debiased(const Corpus& corpus, const std::vector<EditInstruction>& plan,
                            EditorBackend& backend) {
    std::unordered_map<std::string, const SampleRecord*> by_id;
    by_id.reserve(corpus.records.size() * 2);
    for (const SampleRecord& r : corpus.records) by_id.emplace(r.id, &r);

    std::vector<EditJob> jobs;
    jobs.reserve(plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
        auto it = by_id.find(plan[i].source_id);
        if (it == by_id.end()) {
            throw ValidationError("plan references unknown record id \"" + plan[i].source_id + "\"");
        }
        jobs.push_back(EditJob{i, plan[i], *it->second});
    }

    std::vector<EditResult> results = backend.apply_batch(jobs);

    BuildOutcome outcome;
    outcome.n_original = static_cast<std::int64_t>(corpus.records.size());

    std::vector<SampleRecord> bias_edited;
    std::vector<SampleRecord> target_edited;
    for (const EditResult& res : results) {
        const EditInstruction& instr = plan.at(res.index);
        if (!res.warning.empty()) outcome.warnings.push_back(res.warning);
        if (!res.ok()) {
            outcome.failures.push_back({instr.source_id, to_string(instr.kind), res.error});
            continue;
        }
        if (instr.kind == EditKind::bias_edit) {
            bias_edited.push_back(*res.record);
        } else {
            target_edited.push_back(*res.record);
        }
    }
    outcome.n_bias_edit = static_cast<std::int64_t>(bias_edited.size());
    outcome.n_target_edit = static_cast<std::int64_t>(target_edited.size());

    std::vector<SampleRecord> all = corpus.records;
    all.insert(all.end(), bias_edited.begin(), bias_edited.end());
    all.insert(all.end(), target_edited.begin(), target_edited.end());
    outcome.dhat = make_corpus(std::move(all), corpus.source_seed);
    return outcome;
}

Corpus assemble(const Corpus& base, const Corpus& edited) {
    std::unordered_set<std::string> base_ids;
    base_ids.reserve(base.records.size() * 2);
    for (const SampleRecord& r : base.records) base_ids.insert(r.id);
    std::unordered_set<std::string> base_classes(base.class_set.begin(), base.class_set.end());

    std::vector<SampleRecord> bias_edited;
    std::vector<SampleRecord> target_edited;
    for (const SampleRecord& r : edited.records) {
        if (!base_ids.count(source_of(r.id))) {
            throw ValidationError("edited record \"" + r.id +
                                  "\" does not derive from any base record");
        }
        if (!base_classes.count(r.class_label)) {
            throw ValidationError("edited record \"" + r.id + "\" introduces unknown class \"" +
                                  r.class_label + "\"");
        }
        switch (r.provenance) {
            case Provenance::bias_edit: bias_edited.push_back(r); break;
            case Provenance::target_edit: target_edited.push_back(r); break;
            case Provenance::original:
                throw ValidationError("edited corpus contains original-provenance record \"" +
                                      r.id + "\"");
        }
    }
    std::vector<SampleRecord> all = base.records;
    all.insert(all.end(), bias_edited.begin(), bias_edited.end());
    all.insert(all.end(), target_edited.begin(), target_edited.end());
    return make_corpus(std::move(all), base.source_seed);
}

Corpus sample_matched(const Corpus& dhat, std::size_t n_target, std::uint64_t seed) {
    if (n_target < dhat.class_set.size()) {
        throw ValidationError("sample size " + std::to_string(n_target) +
                              " cannot cover all " + std::to_string(dhat.class_set.size()) +
                              " classes");
    }
    if (n_target > dhat.records.size()) {
        throw ValidationError("sample size " + std::to_string(n_target) +
                              " exceeds dataset size " + std::to_string(dhat.records.size()));
    }

    const std::size_t n = dhat.records.size();
    Rng rng = Rng::stream(seed, kSampleDomain, 0);

    auto covers_all_classes = [&](const std::vector<std::size_t>& picked) {
        std::unordered_set<std::string> seen;
        for (std::size_t i : picked) seen.insert(dhat.records[i].class_label);
        return seen.size() == dhat.class_set.size();
    };

    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;

    std::vector<std::size_t> picked;
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<std::size_t> pool = indices;
        rng.shuffle(pool);
        picked.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_target));
        if (covers_all_classes(picked)) break;
        picked.clear();
    }
    if (picked.empty()) {
        // Stratified fallback: one seeded pick per class, then fill.
        std::unordered_map<std::string, std::vector<std::size_t>> per_class;
        for (std::size_t i = 0; i < n; ++i) per_class[dhat.records[i].class_label].push_back(i);
        std::unordered_set<std::size_t> chosen;
        for (const std::string& cls : dhat.class_set) {
            const std::vector<std::size_t>& members = per_class.at(cls);
            chosen.insert(members[rng.below(members.size())]);
        }
        std::vector<std::size_t> pool = indices;
        rng.shuffle(pool);
        for (std::size_t i : pool) {
            if (chosen.size() >= n_target) break;
            chosen.insert(i);
        }
        picked.assign(chosen.begin(), chosen.end());
    }

    std::sort(picked.begin(), picked.end());
    std::vector<SampleRecord> records;
    records.reserve(picked.size());
    for (std::size_t i : picked) records.push_back(dhat.records[i]);
    return make_corpus(std::move(records), dhat.source_seed);
}

Corpus subset_by_provenance(const Corpus& dhat, const std::set<Provenance>& keep) {
    if (keep.empty() || !keep.count(Provenance::original)) {
        throw ValidationError("provenance subset must include original records");
    }
    std::vector<SampleRecord> records;
    for (const SampleRecord& r : dhat.records) {
        if (keep.count(r.provenance)) records.push_back(r);
    }
    if (records.empty()) {
        throw ValidationError("provenance subset is empty");
    }
    return make_corpus(std::move(records), dhat.source_seed);
}

} // namespace debias
