#include "debias/editplan.hpp"

#include "debias/errors.hpp"
#include "debias/kv_config.hpp"
#include "debias/rng.hpp"

#include <json.hpp>

#include <fstream>

namespace debias {

using ordered_json = nlohmann::ordered_json;

namespace {
constexpr std::uint64_t kBiasEditDomain = 0xb1a5ed17u;
constexpr std::uint64_t kTargetEditDomain = 0x7a46e7edu;
} // namespace

const char* to_string(EditKind k) {
    return k == EditKind::bias_edit ? "bias_edit" : "target_edit";
}

EditKind edit_kind_from_string(const std::string& s) {
    if (s == "bias_edit") return EditKind::bias_edit;
    if (s == "target_edit") return EditKind::target_edit;
    throw ValidationError("unknown edit kind: \"" + s + "\"");
}

EditTemplates EditTemplates::load(const std::filesystem::path& path) {
    KvConfig cfg = KvConfig::parse_file(path);
    EditTemplates t;
    t.bias_edit_tpl = cfg.get_str("bias_edit", t.bias_edit_tpl);
    t.target_edit_tpl = cfg.get_str("target_edit", t.target_edit_tpl);
    t.target_edit_no_bias_tpl = cfg.get_str("target_edit_no_bias", t.target_edit_no_bias_tpl);
    return t;
}

static std::string render(std::string tpl,
                          const std::vector<std::pair<std::string, std::string>>& vars) {
    for (const auto& [key, value] : vars) {
        const std::string needle = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = tpl.find(needle, pos)) != std::string::npos) {
            tpl.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return tpl;
}

std::vector<EditInstruction> plan_bias_edits(const Corpus& corpus, const BiasReport& report,
                                             const EditTemplates& templates, std::uint64_t seed) {
    // Every corpus class must be covered by the report.
    for (const std::string& cls : corpus.class_set) {
        if (report.find_class(cls) == nullptr) {
            throw ValidationError("bias report does not cover class \"" + cls + "\"");
        }
    }
    // Classes that can donate a replacement bias.
    std::vector<std::pair<std::string, std::string>> donors;  // (class, bias)
    for (const std::string& cls : corpus.class_set) {
        if (auto bias = report.chosen_bias(cls)) donors.emplace_back(cls, *bias);
    }

    std::vector<EditInstruction> plan;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const SampleRecord& r = corpus.records[i];
        if (r.provenance != Provenance::original) continue;
        auto own_bias = report.chosen_bias(r.class_label);
        if (!own_bias.has_value()) continue;  // undetectable class: no bias edits

        std::vector<const std::pair<std::string, std::string>*> others;
        for (const auto& d : donors) {
            if (d.first != r.class_label) others.push_back(&d);
        }
        if (others.empty()) continue;  // no other class has a detected bias

        Rng rng = Rng::stream(seed, kBiasEditDomain, i);
        const auto& donor = *others[rng.below(others.size())];

        EditInstruction instr;
        instr.source_id = r.id;
        instr.kind = EditKind::bias_edit;
        instr.source_class = r.class_label;
        instr.source_bias = *own_bias;
        instr.replacement_bias = donor.second;
        instr.instruction_text = render(templates.bias_edit_tpl,
                                        {{"class", r.class_label},
                                         {"bias", *own_bias},
                                         {"replacement_bias", donor.second}});
        plan.push_back(std::move(instr));
    }
    return plan;
}

std::vector<EditInstruction> plan_target_edits(const Corpus& corpus, const BiasReport& report,
                                               std::uint64_t seed,
                                               const EditTemplates& templates) {
    if (corpus.class_set.size() < 2) {
        throw ValidationError("target edits require at least two classes");
    }
    std::vector<EditInstruction> plan;
    plan.reserve(corpus.records.size());
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const SampleRecord& r = corpus.records[i];
        if (r.provenance != Provenance::original) continue;

        std::vector<const std::string*> others;
        for (const std::string& cls : corpus.class_set) {
            if (cls != r.class_label) others.push_back(&cls);
        }
        Rng rng = Rng::stream(seed, kTargetEditDomain, i);
        const std::string& target = *others[rng.below(others.size())];

        auto own_bias = report.chosen_bias(r.class_label);

        EditInstruction instr;
        instr.source_id = r.id;
        instr.kind = EditKind::target_edit;
        instr.source_class = r.class_label;
        instr.target_class = target;
        instr.source_bias = own_bias;
        if (own_bias.has_value()) {
            instr.instruction_text = render(templates.target_edit_tpl,
                                            {{"class", r.class_label},
                                             {"target_class", target},
                                             {"bias", *own_bias}});
        } else {
            instr.instruction_text = render(templates.target_edit_no_bias_tpl,
                                            {{"class", r.class_label},
                                             {"target_class", target}});
        }
        plan.push_back(std::move(instr));
    }
    return plan;
}

std::string instruction_to_json_line(const EditInstruction& instr) {
    ordered_json j;
    j["source_id"] = instr.source_id;
    j["kind"] = to_string(instr.kind);
    j["source_class"] = instr.source_class;
    if (instr.target_class) j["target_class"] = *instr.target_class;
    if (instr.source_bias) j["source_bias"] = *instr.source_bias;
    if (instr.replacement_bias) j["replacement_bias"] = *instr.replacement_bias;
    j["instruction_text"] = instr.instruction_text;
    return j.dump();
}

EditInstruction instruction_from_json_line(const std::string& line) {
    ordered_json j = ordered_json::parse(line);
    if (!j.is_object()) {
        throw ValidationError("plan line is not a JSON object");
    }
    EditInstruction instr;
    instr.source_id = j.at("source_id").get<std::string>();
    instr.kind = edit_kind_from_string(j.at("kind").get<std::string>());
    instr.source_class = j.at("source_class").get<std::string>();
    if (j.contains("target_class") && !j["target_class"].is_null()) {
        instr.target_class = j["target_class"].get<std::string>();
    }
    if (j.contains("source_bias") && !j["source_bias"].is_null()) {
        instr.source_bias = j["source_bias"].get<std::string>();
    }
    if (j.contains("replacement_bias") && !j["replacement_bias"].is_null()) {
        instr.replacement_bias = j["replacement_bias"].get<std::string>();
    }
    instr.instruction_text = j.at("instruction_text").get<std::string>();

    if (instr.kind == EditKind::target_edit) {
        if (!instr.target_class || *instr.target_class == instr.source_class) {
            throw ValidationError("target_edit for \"" + instr.source_id +
                                  "\" must name a target class distinct from the source");
        }
    } else if (!instr.source_bias) {
        throw ValidationError("bias_edit for \"" + instr.source_id + "\" missing source_bias");
    }
    return instr;
}

void write_plan(const std::vector<EditInstruction>& plan, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write plan file: " + path.string());
    }
    for (const EditInstruction& instr : plan) {
        out << instruction_to_json_line(instr) << '\n';
    }
    if (!out) {
        throw ValidationError("I/O failure writing plan: " + path.string());
    }
}

std::vector<EditInstruction> load_plan(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open plan file: " + path.string());
    }
    std::vector<EditInstruction> plan;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            plan.push_back(instruction_from_json_line(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": JSON parse error: " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return plan;
}

} // namespace debias
