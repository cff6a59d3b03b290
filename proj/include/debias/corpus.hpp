#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace debias {

enum class Provenance { original, bias_edit, target_edit };
enum class TruthAlignment { aligned, conflict };

const char* to_string(Provenance p);
const char* to_string(TruthAlignment a);
Provenance provenance_from_string(const std::string& s);
TruthAlignment alignment_from_string(const std::string& s);

// ASCII case fold; bytes outside ASCII pass through unchanged.
std::string fold_case(const std::string& s);

/// One annotated sample. Tags are a set: case-folded, deduplicated and
/// kept sorted so serialization is canonical.
struct SampleRecord {
    std::string id;
    std::string class_label;
    std::vector<std::string> tags;
    std::optional<std::vector<double>> features;
    Provenance provenance = Provenance::original;
    std::optional<TruthAlignment> truth_alignment;
    std::map<std::string, std::string> meta;

    bool has_tag(const std::string& tag) const;
    bool operator==(const SampleRecord&) const = default;
};

/// An ordered collection of records plus the distinct class labels in
/// first-appearance order. Immutable after construction; safe to share
/// read-only across threads.
struct Corpus {
    std::vector<SampleRecord> records;
    std::vector<std::string> class_set;
    // Generator seed when known; bookkeeping only, not part of the
    // serialized value, so equality ignores it.
    std::optional<std::int64_t> source_seed;

    std::size_t size() const { return records.size(); }
    bool operator==(const Corpus& other) const {
        return records == other.records && class_set == other.class_set;
    }
};

struct CorpusSummary {
    std::int64_t total = 0;
    std::vector<std::pair<std::string, std::int64_t>> per_class;
    std::int64_t vocabulary_size = 0;
    std::optional<std::size_t> feature_dim;
};

// Normalizes tags in place (fold, dedupe, sort). Throws on empty tags.
void normalize_record(SampleRecord& r);

// Builds a corpus from records: normalizes, validates ids/features/classes,
// derives class_set. Throws ValidationError on any invariant breach.
Corpus make_corpus(std::vector<SampleRecord> records,
                   std::optional<std::int64_t> source_seed = std::nullopt);

Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Canonical JSONL: fixed key order, sorted tags, "\n"-terminated lines.
std::string corpus_to_jsonl(const Corpus& corpus);
std::string record_to_json_line(const SampleRecord& r);
SampleRecord record_from_json_line(const std::string& line);

CorpusSummary corpus_summary(const Corpus& corpus);

} // namespace debias
