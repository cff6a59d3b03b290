#include "debias/corpus.hpp"

#include "debias/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace debias {

using ordered_json = nlohmann::ordered_json;

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::original: return "original";
        case Provenance::bias_edit: return "bias_edit";
        case Provenance::target_edit: return "target_edit";
    }
    return "original";
}

const char* to_string(TruthAlignment a) {
    return a == TruthAlignment::aligned ? "aligned" : "conflict";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "original") return Provenance::original;
    if (s == "bias_edit") return Provenance::bias_edit;
    if (s == "target_edit") return Provenance::target_edit;
    throw ValidationError("unknown provenance: \"" + s + "\"");
}

TruthAlignment alignment_from_string(const std::string& s) {
    if (s == "aligned") return TruthAlignment::aligned;
    if (s == "conflict") return TruthAlignment::conflict;
    throw ValidationError("unknown truth_alignment: \"" + s + "\"");
}

std::string fold_case(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

bool SampleRecord::has_tag(const std::string& tag) const {
    return std::binary_search(tags.begin(), tags.end(), tag);
}

void normalize_record(SampleRecord& r) {
    for (std::string& t : r.tags) {
        t = fold_case(t);
        if (t.empty()) {
            throw ValidationError("record \"" + r.id + "\": empty tag");
        }
    }
    std::sort(r.tags.begin(), r.tags.end());
    r.tags.erase(std::unique(r.tags.begin(), r.tags.end()), r.tags.end());
}

Corpus make_corpus(std::vector<SampleRecord> records,
                   std::optional<std::int64_t> source_seed) {
    if (records.empty()) {
        throw ValidationError("corpus has no records (empty-class invariant)");
    }
    Corpus corpus;
    corpus.source_seed = source_seed;

    std::unordered_set<std::string> seen_ids;
    seen_ids.reserve(records.size() * 2);
    std::unordered_set<std::string> seen_classes;
    std::optional<std::size_t> feature_dim;
    bool any_features = false;
    bool any_featureless = false;

    for (SampleRecord& r : records) {
        if (r.id.empty()) {
            throw ValidationError("record with empty id");
        }
        if (!seen_ids.insert(r.id).second) {
            throw ValidationError("duplicate record id \"" + r.id + "\"");
        }
        if (r.class_label.empty()) {
            throw ValidationError("record \"" + r.id + "\": empty class label");
        }
        normalize_record(r);
        if (r.features.has_value()) {
            any_features = true;
            if (!feature_dim.has_value()) {
                feature_dim = r.features->size();
            } else if (*feature_dim != r.features->size()) {
                throw ValidationError(
                    "record \"" + r.id + "\": feature dimensionality " +
                    std::to_string(r.features->size()) + " != " + std::to_string(*feature_dim));
            }
        } else {
            any_featureless = true;
        }
        if (seen_classes.insert(r.class_label).second) {
            corpus.class_set.push_back(r.class_label);
        }
    }
    if (any_features && any_featureless) {
        throw ValidationError("mixed corpus: some records have features, some do not");
    }
    corpus.records = std::move(records);
    return corpus;
}

std::string record_to_json_line(const SampleRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["class"] = r.class_label;
    j["tags"] = r.tags;
    if (r.features.has_value()) j["features"] = *r.features;
    j["provenance"] = to_string(r.provenance);
    if (r.truth_alignment.has_value()) j["truth_alignment"] = to_string(*r.truth_alignment);
    if (!r.meta.empty()) j["meta"] = r.meta;
    return j.dump();
}

static std::string json_scalar_to_string(const ordered_json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

SampleRecord record_from_json_line(const std::string& line) {
    ordered_json j = ordered_json::parse(line);
    if (!j.is_object()) {
        throw ValidationError("record line is not a JSON object");
    }
    SampleRecord r;
    if (!j.contains("id") || !j["id"].is_string()) {
        throw ValidationError("record missing string \"id\"");
    }
    r.id = j["id"].get<std::string>();
    if (!j.contains("class") || !j["class"].is_string()) {
        throw ValidationError("record \"" + r.id + "\" missing string \"class\"");
    }
    r.class_label = j["class"].get<std::string>();
    if (!j.contains("tags") || !j["tags"].is_array()) {
        throw ValidationError("record \"" + r.id + "\" missing array \"tags\"");
    }
    for (const auto& t : j["tags"]) {
        if (!t.is_string()) {
            throw ValidationError("record \"" + r.id + "\": non-string tag");
        }
        r.tags.push_back(t.get<std::string>());
    }
    if (j.contains("features")) {
        if (!j["features"].is_array()) {
            throw ValidationError("record \"" + r.id + "\": \"features\" must be an array");
        }
        std::vector<double> feats;
        for (const auto& f : j["features"]) {
            if (!f.is_number()) {
                throw ValidationError("record \"" + r.id + "\": non-numeric feature");
            }
            feats.push_back(f.get<double>());
        }
        r.features = std::move(feats);
    }
    if (j.contains("provenance")) {
        if (!j["provenance"].is_string()) {
            throw ValidationError("record \"" + r.id + "\": \"provenance\" must be a string");
        }
        r.provenance = provenance_from_string(j["provenance"].get<std::string>());
    }
    if (j.contains("truth_alignment") && !j["truth_alignment"].is_null()) {
        if (!j["truth_alignment"].is_string()) {
            throw ValidationError("record \"" + r.id + "\": \"truth_alignment\" must be a string");
        }
        r.truth_alignment = alignment_from_string(j["truth_alignment"].get<std::string>());
    }
    if (j.contains("meta")) {
        if (!j["meta"].is_object()) {
            throw ValidationError("record \"" + r.id + "\": \"meta\" must be an object");
        }
        for (const auto& [k, v] : j["meta"].items()) {
            r.meta[k] = json_scalar_to_string(v);
        }
    }
    // Unknown keys survive in meta for forward compatibility.
    static const std::set<std::string> known = {
        "id", "class", "tags", "features", "provenance", "truth_alignment", "meta"};
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) {
            r.meta.insert({k, json_scalar_to_string(v)});
        }
    }
    return r;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const SampleRecord& r : corpus.records) {
        out += record_to_json_line(r);
        out += '\n';
    }
    return out;
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open corpus file: " + path.string());
    }
    std::vector<SampleRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            records.push_back(record_from_json_line(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": JSON parse error: " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    try {
        return make_corpus(std::move(records));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    // Re-validates so a hand-assembled corpus cannot skip the invariants.
    Corpus checked = make_corpus(corpus.records, corpus.source_seed);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot open corpus file for writing: " + path.string());
    }
    out << corpus_to_jsonl(checked);
    if (!out) {
        throw ValidationError("I/O failure writing corpus: " + path.string());
    }
}

CorpusSummary corpus_summary(const Corpus& corpus) {
    CorpusSummary s;
    s.total = static_cast<std::int64_t>(corpus.records.size());
    std::map<std::string, std::int64_t> counts;
    std::set<std::string> vocab;
    for (const SampleRecord& r : corpus.records) {
        counts[r.class_label]++;
        vocab.insert(r.tags.begin(), r.tags.end());
        if (!s.feature_dim.has_value() && r.features.has_value()) {
            s.feature_dim = r.features->size();
        }
    }
    for (const std::string& c : corpus.class_set) {
        s.per_class.emplace_back(c, counts[c]);
    }
    s.vocabulary_size = static_cast<std::int64_t>(vocab.size());
    return s;
}

} // namespace debias
