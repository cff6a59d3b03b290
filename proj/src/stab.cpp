#include "debias/stab.hpp"

#include "debias/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace debias {

using ordered_json = nlohmann::ordered_json;

const char* to_string(DetectMode m) {
    switch (m) {
        case DetectMode::dependence_only: return "dependence_only";
        case DetectMode::mi_only: return "mi_only";
        case DetectMode::both: return "both";
    }
    return "both";
}

DetectMode detect_mode_from_string(const std::string& s) {
    if (s == "dependence_only") return DetectMode::dependence_only;
    if (s == "mi_only") return DetectMode::mi_only;
    if (s == "both") return DetectMode::both;
    throw ValidationError("unknown detection mode: \"" + s + "\"");
}

const ClassDetection* BiasReport::find_class(const std::string& cls) const {
    for (const auto& [name, det] : per_class) {
        if (name == cls) return &det;
    }
    return nullptr;
}

std::optional<std::string> BiasReport::chosen_bias(const std::string& cls) const {
    const ClassDetection* det = find_class(cls);
    if (det == nullptr || det->chosen.empty()) return std::nullopt;
    return det->chosen.front();
}

namespace {

BiasReport detect_impl(const ContingencyTable& table, DetectMode mode,
                       const std::vector<Exclusion>& exclusions, int chosen_k,
                       int ranked_k, bool multi, std::int64_t min_support) {
    if (chosen_k < 1 || ranked_k < 1) {
        throw ValidationError("detect: k must be >= 1");
    }
    if (table.attributes().empty()) {
        throw ValidationError("detect: table has no attributes");
    }

    BiasReport report;
    report.mode = mode;
    report.multi = multi;
    report.exclusions = exclusions;

    // Pre-fold exclusion rules once.
    std::unordered_set<std::string> global_excluded;
    std::vector<std::pair<std::string, std::string>> class_excluded;  // (folded class, folded attr)
    for (const Exclusion& ex : exclusions) {
        if (ex.class_label.empty()) {
            global_excluded.insert(fold_case(ex.attribute));
        } else {
            class_excluded.emplace_back(fold_case(ex.class_label), fold_case(ex.attribute));
        }
    }

    const std::size_t n_attrs = table.attributes().size();
    for (std::size_t ci = 0; ci < table.classes().size(); ++ci) {
        const std::string& cls = table.classes()[ci];
        const std::string folded_class = fold_case(cls);
        const double p_marg =
            static_cast<double>(table.class_size_at(ci)) / static_cast<double>(table.total());

        std::vector<BiasCandidate> eligible;
        for (std::size_t ai = 0; ai < n_attrs; ++ai) {
            const std::string& attr = table.attributes()[ai];
            if (attr == folded_class) continue;  // the class label is never a bias candidate
            if (global_excluded.count(attr)) continue;
            bool skip = false;
            for (const auto& [xc, xa] : class_excluded) {
                if (xc == folded_class && xa == attr) { skip = true; break; }
            }
            if (skip) continue;
            if (table.attr_total_at(ai) < min_support) continue;

            BiasCandidate cand;
            cand.attribute = attr;
            cand.count = table.count_at(ci, ai);
            cand.p_cond = static_cast<double>(cand.count) /
                          static_cast<double>(table.attr_total_at(ai));
            cand.p_marg = p_marg;
            cand.dependent = is_dependent_at(table, ci, ai);
            cand.mi_bits = mutual_information_at(table, ci, ai);

            const bool needs_dependence = mode != DetectMode::mi_only;
            if (needs_dependence && !cand.dependent) continue;
            eligible.push_back(std::move(cand));
        }

        const bool score_by_mi = mode != DetectMode::dependence_only;
        std::sort(eligible.begin(), eligible.end(),
                  [score_by_mi](const BiasCandidate& a, const BiasCandidate& b) {
                      const double sa = score_by_mi ? a.mi_bits : a.p_cond;
                      const double sb = score_by_mi ? b.mi_bits : b.p_cond;
                      if (sa != sb) return sa > sb;
                      if (a.count != b.count) return a.count > b.count;
                      return a.attribute < b.attribute;
                  });

        ClassDetection det;
        det.k = ranked_k;
        const std::size_t keep_ranked =
            std::min<std::size_t>(static_cast<std::size_t>(ranked_k), eligible.size());
        const std::size_t keep_chosen =
            std::min<std::size_t>(static_cast<std::size_t>(chosen_k), eligible.size());
        for (std::size_t i = 0; i < keep_chosen; ++i) det.chosen.push_back(eligible[i].attribute);
        det.ranked.assign(eligible.begin(), eligible.begin() + keep_ranked);
        report.per_class.emplace_back(cls, std::move(det));
    }
    return report;
}

} // namespace

BiasReport detect(const ContingencyTable& table, DetectMode mode,
                  const std::vector<Exclusion>& exclusions, int k,
                  std::int64_t min_support) {
    return detect_impl(table, mode, exclusions, /*chosen_k=*/1, /*ranked_k=*/k,
                       /*multi=*/false, min_support);
}

BiasReport detect_multi(const ContingencyTable& table,
                        const std::vector<Exclusion>& exclusions, int k_bias,
                        int ranked_k, std::int64_t min_support) {
    if (k_bias < 2) {
        throw ValidationError("detect_multi: k_bias must be >= 2");
    }
    if (ranked_k <= 0) ranked_k = std::max(k_bias, 3);
    return detect_impl(table, DetectMode::both, exclusions, k_bias, ranked_k,
                       /*multi=*/true, min_support);
}

std::string report_to_json(const BiasReport& report) {
    ordered_json j;
    j["mode"] = to_string(report.mode);
    ordered_json exs = ordered_json::array();
    for (const Exclusion& ex : report.exclusions) {
        ordered_json e;
        e["class"] = ex.class_label.empty() ? ordered_json(nullptr) : ordered_json(ex.class_label);
        e["attr"] = ex.attribute;
        exs.push_back(std::move(e));
    }
    j["exclusions"] = std::move(exs);
    ordered_json classes = ordered_json::object();
    for (const auto& [cls, det] : report.per_class) {
        ordered_json c;
        if (det.chosen.empty()) {
            c["chosen"] = nullptr;
        } else if (!report.multi) {
            c["chosen"] = det.chosen.front();
        } else {
            c["chosen"] = det.chosen;
        }
        ordered_json ranked = ordered_json::array();
        for (const BiasCandidate& cand : det.ranked) {
            ordered_json r;
            r["attr"] = cand.attribute;
            r["count"] = cand.count;
            r["p_cond"] = cand.p_cond;
            r["p_marg"] = cand.p_marg;
            r["dependent"] = cand.dependent;
            r["mi_bits"] = cand.mi_bits;
            ranked.push_back(std::move(r));
        }
        c["ranked"] = std::move(ranked);
        c["k"] = det.k;
        classes[cls] = std::move(c);
    }
    j["classes"] = std::move(classes);
    return j.dump(2) + "\n";
}

BiasReport report_from_json(const std::string& bytes) {
    ordered_json j;
    try {
        j = ordered_json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("bias report: JSON parse error: ") + e.what());
    }
    if (!j.is_object() || !j.contains("mode") || !j["mode"].is_string() ||
        !j.contains("classes") || !j["classes"].is_object()) {
        throw ValidationError("bias report: expected object with \"mode\" and \"classes\"");
    }
    BiasReport report;
    report.mode = detect_mode_from_string(j["mode"].get<std::string>());
    if (j.contains("exclusions")) {
        if (!j["exclusions"].is_array()) {
            throw ValidationError("bias report: \"exclusions\" must be an array");
        }
        for (const auto& e : j["exclusions"]) {
            Exclusion ex;
            if (e.contains("class") && !e["class"].is_null()) {
                ex.class_label = e["class"].get<std::string>();
            }
            ex.attribute = e.at("attr").get<std::string>();
            report.exclusions.push_back(std::move(ex));
        }
    }
    bool any_multi = false;
    for (const auto& [cls, c] : j["classes"].items()) {
        ClassDetection det;
        if (!c.contains("chosen")) {
            throw ValidationError("bias report: class \"" + cls + "\" missing \"chosen\"");
        }
        const auto& chosen = c["chosen"];
        if (chosen.is_string()) {
            det.chosen.push_back(chosen.get<std::string>());
        } else if (chosen.is_array()) {
            any_multi = true;
            for (const auto& a : chosen) det.chosen.push_back(a.get<std::string>());
        } else if (!chosen.is_null()) {
            throw ValidationError("bias report: \"chosen\" must be string, array or null");
        }
        if (!c.contains("ranked") || !c["ranked"].is_array()) {
            throw ValidationError("bias report: class \"" + cls + "\" missing \"ranked\" array");
        }
        for (const auto& r : c["ranked"]) {
            BiasCandidate cand;
            cand.attribute = r.at("attr").get<std::string>();
            cand.count = r.at("count").get<std::int64_t>();
            cand.p_cond = r.at("p_cond").get<double>();
            cand.p_marg = r.at("p_marg").get<double>();
            cand.dependent = r.at("dependent").get<bool>();
            cand.mi_bits = r.at("mi_bits").get<double>();
            det.ranked.push_back(std::move(cand));
        }
        det.k = c.contains("k") ? c["k"].get<int>() : static_cast<int>(det.ranked.size());
        report.per_class.emplace_back(cls, std::move(det));
    }
    report.multi = any_multi;
    return report;
}

BiasReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open bias report: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return report_from_json(ss.str());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_report(const BiasReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write bias report: " + path.string());
    }
    out << report_to_json(report);
}

} // namespace debias
