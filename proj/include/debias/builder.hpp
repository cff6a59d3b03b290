#pragma once

#include "debias/corpus.hpp"
#include "debias/editor.hpp"
#include "debias/editplan.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace debias {

struct EditFailure {
    std::string source_id;
    std::string kind;
    std::string error;
};

struct BuildOutcome {
    Corpus dhat;
    std::vector<EditFailure> failures;
    std::vector<std::string> warnings;
    std::int64_t n_original = 0;
    std::int64_t n_bias_edit = 0;
    std::int64_t n_target_edit = 0;
};

/// Applies the plan with the given backend and assembles the augmented
/// dataset: originals first (input order), then bias edits, then target
/// edits, each in plan order. Failed edits are dropped and reported.
BuildOutcome build_debiased(const Corpus& corpus, const std::vector<EditInstruction>& plan,
                            EditorBackend& backend);

/// Assembles from an already-edited corpus (the CLI `edit` stage output).
Corpus assemble(const Corpus& base, const Corpus& edited);

/// Uniform sample without replacement of n_target records, seeded. Keeps
/// at least one record per class: up to 100 fresh draws, then a
/// stratified fallback. Output preserves the input record order.
Corpus sample_matched(const Corpus& dhat, std::size_t n_target, std::uint64_t seed);

/// Filters by provenance; `keep` must contain `original`.
Corpus subset_by_provenance(const Corpus& dhat, const std::set<Provenance>& keep);

} // namespace debias
