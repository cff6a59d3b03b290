#pragma once

#include "debias/corpus.hpp"
#include "debias/stab.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace debias {

enum class EditKind { bias_edit, target_edit };

const char* to_string(EditKind k);
EditKind edit_kind_from_string(const std::string& s);

/// One planned edit of a source record. target_class is set only for
/// target edits; source_bias carries the source class's detected bias
/// when one exists.
struct EditInstruction {
    std::string source_id;
    EditKind kind = EditKind::bias_edit;
    std::string source_class;
    std::optional<std::string> target_class;
    std::optional<std::string> source_bias;
    std::optional<std::string> replacement_bias;
    std::string instruction_text;

    bool operator==(const EditInstruction&) const = default;
};

/// Natural-language templates rendered into instruction_text.
/// Placeholders: {class}, {target_class}, {bias}, {replacement_bias}.
struct EditTemplates {
    std::string bias_edit_tpl =
        "Turn this {class} person's {bias} into {replacement_bias} while keeping other "
        "attributes unchanged.";
    std::string target_edit_tpl =
        "Turn this {bias} into a {target_class} {bias} while keeping other attributes "
        "unchanged.";
    std::string target_edit_no_bias_tpl =
        "Turn this {class} into a {target_class} while keeping other attributes unchanged.";

    static EditTemplates load(const std::filesystem::path& path);
};

/// One bias-edit instruction per original record whose class has a
/// detected bias. The replacement is another class's detected bias,
/// drawn per record from a seeded stream.
std::vector<EditInstruction> plan_bias_edits(const Corpus& corpus, const BiasReport& report,
                                             const EditTemplates& templates = {},
                                             std::uint64_t seed = 0);

/// One target-edit instruction per original record; the target class is
/// drawn uniformly from the other classes.
std::vector<EditInstruction> plan_target_edits(const Corpus& corpus, const BiasReport& report,
                                               std::uint64_t seed,
                                               const EditTemplates& templates = {});

void write_plan(const std::vector<EditInstruction>& plan, const std::filesystem::path& path);
std::vector<EditInstruction> load_plan(const std::filesystem::path& path);
std::string instruction_to_json_line(const EditInstruction& instr);
EditInstruction instruction_from_json_line(const std::string& line);

} // namespace debias
