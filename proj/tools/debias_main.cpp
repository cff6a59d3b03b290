// debias: bias detection and counterfactual dataset construction pipeline.
//
// Subcommands mirror the pipeline stages: synth -> detect -> plan -> edit
// -> build -> train -> eval -> report. Every stage writes a manifest with
// input/output digests so runs can be compared byte-for-byte.

#include "debias/builder.hpp"
#include "debias/corpus.hpp"
#include "debias/digest.hpp"
#include "debias/editor.hpp"
#include "debias/editplan.hpp"
#include "debias/errors.hpp"
#include "debias/eval.hpp"
#include "debias/kv_config.hpp"
#include "debias/stab.hpp"
#include "debias/stats.hpp"
#include "debias/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace debias;

namespace {

constexpr const char* kVersion = "0.1.0";

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write file: " + path.string());
    }
    out << text;
    if (!out) {
        throw ValidationError("I/O failure writing: " + path.string());
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open file: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class ManifestWriter {
public:
    ManifestWriter(std::string subcommand) {
        manifest_["tool"] = "debias";
        manifest_["version"] = kVersion;
        manifest_["subcommand"] = std::move(subcommand);
        manifest_["params"] = ordered_json::object();
        manifest_["inputs"] = ordered_json::object();
        manifest_["outputs"] = ordered_json::object();
    }

    void param(const std::string& key, const ordered_json& value) {
        manifest_["params"][key] = value;
    }
    void input(const fs::path& path) {
        manifest_["inputs"][path.string()] = digest_file(path);
    }
    void output(const fs::path& path) {
        manifest_["outputs"][path.string()] = digest_file(path);
    }

    // Directory outputs get dir/manifest.json, file outputs a sibling
    // <stem>.manifest.json.
    void write_for_dir(const fs::path& dir) const {
        write_text(dir / "manifest.json", manifest_.dump(2) + "\n");
    }
    void write_for_file(const fs::path& out_file) const {
        fs::path p = out_file.parent_path() / (out_file.stem().string() + ".manifest.json");
        write_text(p, manifest_.dump(2) + "\n");
    }

private:
    ordered_json manifest_;
};

std::vector<Exclusion> parse_exclusions(const std::vector<std::string>& specs) {
    std::vector<Exclusion> out;
    for (const std::string& spec : specs) {
        Exclusion ex;
        std::size_t colon = spec.find(':');
        if (colon == std::string::npos) {
            ex.attribute = trim(spec);
        } else {
            ex.class_label = trim(spec.substr(0, colon));
            ex.attribute = trim(spec.substr(colon + 1));
        }
        if (ex.attribute.empty()) {
            throw ValidationError("exclusion needs an attribute: \"" + spec + "\"");
        }
        out.push_back(std::move(ex));
    }
    return out;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
    SynthConfig config = SynthConfig::from_file(config_path);
    SynthOutput result = generate(config);
    for (const std::string& w : result.warnings) {
        std::cerr << "warning: " << w << "\n";
    }

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_corpus(result.train, dir / "train.jsonl");
    write_corpus(result.val, dir / "val.jsonl");
    write_corpus(result.test, dir / "test.jsonl");
    write_text(dir / "truth.json", result.truth_json);

    ManifestWriter manifest("synth");
    manifest.param("seed", config.seed);
    manifest.param("rho", config.rho);
    manifest.param("samples_per_class", config.samples_per_class);
    manifest.input(config_path);
    for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "truth.json"}) {
        manifest.output(dir / f);
    }
    manifest.write_for_dir(dir);

    std::cout << "synth: wrote " << result.train.size() << " train, " << result.val.size()
              << " val, " << result.test.size() << " test records to " << out_dir << "\n";
    return 0;
}

int cmd_detect(const std::string& corpus_path, const std::string& mode_str, int top_k,
               bool exclude_class_names, const std::vector<std::string>& exclusion_specs,
               int multi_k, std::int64_t min_support, unsigned threads,
               const std::string& out_path) {
    Corpus corpus = load_corpus(corpus_path);
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    ContingencyTable table = build_table(corpus, threads);

    std::vector<Exclusion> exclusions = parse_exclusions(exclusion_specs);
    if (exclude_class_names) {
        for (const std::string& cls : corpus.class_set) {
            exclusions.push_back(Exclusion{"", cls});
        }
    }

    BiasReport report;
    if (multi_k >= 2) {
        report = detect_multi(table, exclusions, multi_k, top_k, min_support);
    } else {
        report = detect(table, detect_mode_from_string(mode_str), exclusions, top_k, min_support);
    }
    write_report(report, out_path);

    ManifestWriter manifest("detect");
    manifest.param("mode", mode_str);
    manifest.param("top_k", top_k);
    manifest.param("multi_k", multi_k);
    manifest.param("min_support", min_support);
    manifest.param("exclude_class_names", exclude_class_names);
    manifest.input(corpus_path);
    manifest.output(out_path);
    manifest.write_for_file(out_path);

    for (const auto& [cls, det] : report.per_class) {
        std::cout << "detect: class \"" << cls << "\" -> ";
        if (det.chosen.empty()) {
            std::cout << "(none)";
        } else {
            for (std::size_t i = 0; i < det.chosen.size(); ++i) {
                if (i) std::cout << ", ";
                std::cout << "\"" << det.chosen[i] << "\"";
            }
        }
        std::cout << "\n";
    }
    return 0;
}

int cmd_plan(const std::string& corpus_path, const std::string& report_path, std::uint64_t seed,
             const std::string& templates_path, const std::string& out_path) {
    Corpus corpus = load_corpus(corpus_path);
    BiasReport report = load_report(report_path);
    EditTemplates templates;
    if (!templates_path.empty()) templates = EditTemplates::load(templates_path);

    std::vector<EditInstruction> plan = plan_bias_edits(corpus, report, templates, seed);
    std::vector<EditInstruction> targets = plan_target_edits(corpus, report, seed, templates);
    plan.insert(plan.end(), targets.begin(), targets.end());
    write_plan(plan, out_path);

    ManifestWriter manifest("plan");
    manifest.param("seed", seed);
    manifest.input(corpus_path);
    manifest.input(report_path);
    if (!templates_path.empty()) manifest.input(templates_path);
    manifest.output(out_path);
    manifest.write_for_file(out_path);

    std::cout << "plan: " << plan.size() << " instructions (" << plan.size() - targets.size()
              << " bias edits, " << targets.size() << " target edits)\n";
    return 0;
}

int cmd_edit(const std::string& plan_path, const std::string& corpus_path,
             const std::string& backend_spec, const std::string& report_path,
             const std::string& truth_path, std::uint64_t seed, unsigned jobs,
             std::size_t batch_size, const std::string& out_path) {
    Corpus corpus = load_corpus(corpus_path);
    std::vector<EditInstruction> plan = load_plan(plan_path);
    if (plan.empty()) {
        throw ValidationError("plan is empty; nothing to edit");
    }

    MockEditContext tag_ctx;
    if (!report_path.empty()) {
        tag_ctx = MockEditContext::from_report(load_report(report_path));
    } else {
        // Recover the per-class detected bias from the plan itself.
        for (const EditInstruction& instr : plan) {
            if (instr.kind == EditKind::bias_edit && instr.source_bias) {
                tag_ctx.class_bias.emplace(instr.source_class, *instr.source_bias);
            }
        }
    }
    std::optional<FeatureEditContext> feature_ctx;
    if (!truth_path.empty()) {
        feature_ctx = FeatureEditContext::from_truth_file(truth_path, seed);
        if (tag_ctx.class_bias.empty()) tag_ctx = feature_ctx->tags;
        feature_ctx->tags = tag_ctx;
    }

    ExternalEditorOptions options;
    options.jobs = jobs;
    options.batch_size = batch_size;
    std::unique_ptr<EditorBackend> backend =
        make_backend(backend_spec, tag_ctx, feature_ctx, options);

    BuildOutcome outcome = build_debiased(corpus, plan, *backend);
    for (const std::string& w : outcome.warnings) {
        std::cerr << "warning: " << w << "\n";
    }

    const fs::path out_file(out_path);
    if (!outcome.failures.empty()) {
        fs::path failures_path =
            out_file.parent_path() / (out_file.stem().string() + ".failures.jsonl");
        std::string lines;
        for (const EditFailure& f : outcome.failures) {
            ordered_json j;
            j["source_id"] = f.source_id;
            j["kind"] = f.kind;
            j["error"] = f.error;
            lines += j.dump();
            lines += '\n';
        }
        write_text(failures_path, lines);
        std::cerr << "edit: " << outcome.failures.size() << " edits failed; see "
                  << failures_path.string() << "\n";
    }

    // The edit stage emits only the edited records; `build` assembles.
    std::vector<SampleRecord> edited;
    for (const SampleRecord& r : outcome.dhat.records) {
        if (r.provenance != Provenance::original) edited.push_back(r);
    }
    if (edited.empty()) {
        std::string why = "all edits failed; no output corpus";
        if (!outcome.failures.empty()) why += " (first: " + outcome.failures.front().error + ")";
        throw BackendError(why);
    }
    write_corpus(make_corpus(std::move(edited)), out_path);

    ManifestWriter manifest("edit");
    manifest.param("backend", backend->name());
    manifest.param("seed", seed);
    manifest.param("jobs", jobs);
    manifest.param("failures", outcome.failures.size());
    manifest.input(plan_path);
    manifest.input(corpus_path);
    if (!report_path.empty()) manifest.input(report_path);
    if (!truth_path.empty()) manifest.input(truth_path);
    manifest.output(out_path);
    manifest.write_for_file(out_path);

    std::cout << "edit: " << outcome.n_bias_edit << " bias edits, " << outcome.n_target_edit
              << " target edits, " << outcome.failures.size() << " failures\n";
    return 0;
}

int cmd_build(const std::string& corpus_path, const std::string& edited_path,
              const std::string& variant, std::uint64_t seed, const std::string& out_path) {
    Corpus base = load_corpus(corpus_path);
    Corpus edited = load_corpus(edited_path);
    Corpus full = assemble(base, edited);

    Corpus result;
    if (variant == "full") {
        result = full;
    } else if (variant == "sampled") {
        result = sample_matched(full, base.size(), seed);
    } else if (variant == "be-only") {
        result = subset_by_provenance(full, {Provenance::original, Provenance::bias_edit});
    } else if (variant == "te-only") {
        result = subset_by_provenance(full, {Provenance::original, Provenance::target_edit});
    } else {
        throw ValidationError("unknown variant \"" + variant +
                              "\" (expected full, sampled, be-only or te-only)");
    }
    write_corpus(result, out_path);

    std::int64_t n_orig = 0;
    std::int64_t n_be = 0;
    std::int64_t n_te = 0;
    for (const SampleRecord& r : result.records) {
        switch (r.provenance) {
            case Provenance::original: ++n_orig; break;
            case Provenance::bias_edit: ++n_be; break;
            case Provenance::target_edit: ++n_te; break;
        }
    }

    const fs::path out_file(out_path);
    ordered_json build_manifest;
    build_manifest["variant"] = variant;
    build_manifest["seed"] = seed;
    build_manifest["counts"] = {{"original", n_orig}, {"bias_edit", n_be}, {"target_edit", n_te}};
    build_manifest["total"] = static_cast<std::int64_t>(result.size());
    write_text(out_file.parent_path() / "build_manifest.json", build_manifest.dump(2) + "\n");

    ManifestWriter manifest("build");
    manifest.param("variant", variant);
    manifest.param("seed", seed);
    manifest.input(corpus_path);
    manifest.input(edited_path);
    manifest.output(out_path);
    manifest.write_for_file(out_path);

    std::cout << "build: " << result.size() << " records (" << n_orig << " original, " << n_be
              << " bias-edit, " << n_te << " target-edit)\n";
    return 0;
}

int cmd_train(const std::string& train_path, const std::string& val_path,
              const std::string& test_path, const std::string& report_path, int epochs, double lr,
              int batch, std::uint64_t seed, const std::string& out_dir) {
    Corpus train = load_corpus(train_path);
    Corpus val = load_corpus(val_path);
    Corpus test = load_corpus(test_path);

    std::optional<BiasReport> report;
    if (!report_path.empty()) report = load_report(report_path);
    std::map<std::string, TruthAlignment> test_alignment =
        alignment_map(test, report ? &*report : nullptr);

    TrainConfig config{epochs, lr, batch, seed};
    TrainResult result = train_linear(train, val, test, config, test_alignment);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    fs::create_directories(dir / "snapshots");
    write_text(dir / "trace.jsonl", trace_to_jsonl(result.trace));
    for (std::size_t i = 0; i < result.snapshots.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%04d.json", result.trace[i].epoch);
        write_text(dir / "snapshots" / name, result.snapshots[i].to_json(result.trace[i].epoch));
    }

    ManifestWriter manifest("train");
    manifest.param("epochs", epochs);
    manifest.param("lr", lr);
    manifest.param("batch", batch);
    manifest.param("seed", seed);
    manifest.param("test_path", test_path);
    manifest.param("alignment_source", report ? "report" : "truth");
    manifest.param("n_bc", result.n_bc);
    manifest.param("n_ba", result.n_ba);
    manifest.input(train_path);
    manifest.input(val_path);
    manifest.input(test_path);
    if (!report_path.empty()) manifest.input(report_path);
    manifest.output(dir / "trace.jsonl");
    manifest.write_for_dir(dir);

    const TraceRow& last = result.trace.back();
    std::cout << "train: " << result.trace.size() << " epochs; final id_val="
              << last.id_val_acc << " bc=" << last.test_bc_acc << " ba=" << last.test_ba_acc
              << "\n";
    return 0;
}

ordered_json metrics_json(Protocol protocol, int epoch, const GroupMetrics& m) {
    ordered_json j;
    j["protocol"] = to_string(protocol);
    j["epoch"] = epoch;
    j["bc_acc"] = m.bc_acc;
    j["ba_acc"] = m.ba_acc;
    j["avg"] = m.avg;
    j["n_bc"] = m.n_bc;
    j["n_ba"] = m.n_ba;
    return j;
}

int cmd_eval(const std::string& run_dir, const std::string& protocol_str,
             const std::string& report_path, const std::string& test_override,
             const std::string& predictions_path, const std::string& test_path,
             const std::string& out_path) {
    const Protocol protocol = protocol_from_string(protocol_str);
    std::optional<BiasReport> report;
    if (!report_path.empty()) report = load_report(report_path);

    GroupMetrics metrics;
    int epoch = 0;
    ManifestWriter manifest("eval");
    manifest.param("protocol", protocol_str);

    if (!predictions_path.empty()) {
        // External-classifier mode: score a predictions file directly.
        if (test_path.empty()) {
            throw ValidationError("--predictions requires --test");
        }
        Corpus test = load_corpus(test_path);
        auto predictions = load_predictions(predictions_path);
        metrics = group_accuracy(predictions, test, alignment_map(test, report ? &*report : nullptr));
        manifest.input(predictions_path);
        manifest.input(test_path);
    } else {
        if (run_dir.empty()) {
            throw ValidationError("eval needs --run or --predictions");
        }
        const fs::path dir(run_dir);
        std::vector<TraceRow> trace = trace_from_jsonl(read_text(dir / "trace.jsonl"));
        const std::size_t selected = select_checkpoint(trace, protocol);
        epoch = trace[selected].epoch;

        fs::path test_file;
        if (!test_override.empty()) {
            test_file = test_override;
        } else {
            ordered_json run_manifest = ordered_json::parse(read_text(dir / "manifest.json"));
            test_file = run_manifest.at("params").at("test_path").get<std::string>();
        }
        Corpus test = load_corpus(test_file);

        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%04d.json", epoch);
        LinearModel model = LinearModel::from_json(read_text(dir / "snapshots" / name));
        auto predictions = predict_all(model, test);
        metrics = group_accuracy(predictions, test, alignment_map(test, report ? &*report : nullptr));
        manifest.input(dir / "trace.jsonl");
        manifest.input(test_file);
    }
    if (!report_path.empty()) manifest.input(report_path);

    write_text(out_path, metrics_json(protocol, epoch, metrics).dump(2) + "\n");
    manifest.output(out_path);
    manifest.write_for_file(out_path);

    std::cout << "eval: protocol=" << protocol_str << " epoch=" << epoch
              << " bc=" << metrics.bc_acc << " ba=" << metrics.ba_acc << " avg=" << metrics.avg
              << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out_path) {
    std::string table;
    table += "| run | protocol | epoch | BC | BA | Avg |\n";
    table += "|---|---|---|---|---|---|\n";
    char line[256];
    for (const std::string& run : runs) {
        fs::path p(run);
        if (fs::is_directory(p)) p /= "metrics.json";
        ordered_json j = ordered_json::parse(read_text(p));
        std::snprintf(line, sizeof(line), "| %s | %s | %d | %.4f | %.4f | %.4f |\n",
                      run.c_str(), j.at("protocol").get<std::string>().c_str(),
                      j.at("epoch").get<int>(), j.at("bc_acc").get<double>(),
                      j.at("ba_acc").get<double>(), j.at("avg").get<double>());
        table += line;
    }
    write_text(out_path, table);

    ManifestWriter manifest("report");
    for (const std::string& run : runs) {
        fs::path p(run);
        if (fs::is_directory(p)) p /= "metrics.json";
        manifest.input(p);
    }
    manifest.output(out_path);
    manifest.write_for_file(out_path);

    std::cout << table;
    return 0;
}

// Reference worker for the external-editor stdio protocol. Reads
// {"instruction":..., "record":...} lines, writes edited record lines.
int cmd_edit_worker(const std::string& mode, const std::string& report_path,
                    const std::string& truth_path, std::uint64_t seed) {
    MockEditContext tag_ctx;
    std::optional<FeatureEditContext> feature_ctx;
    if (!truth_path.empty()) {
        feature_ctx = FeatureEditContext::from_truth_file(truth_path, seed);
        tag_ctx = feature_ctx->tags;
    }
    if (!report_path.empty()) {
        MockEditContext from_report = MockEditContext::from_report(load_report(report_path));
        tag_ctx.class_bias = from_report.class_bias;
        if (feature_ctx) feature_ctx->tags = tag_ctx;
    }

    std::string line;
    std::size_t index = 0;
    while (std::getline(std::cin, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ordered_json j = ordered_json::parse(line);
        EditInstruction instr = instruction_from_json_line(j.at("instruction").dump());
        SampleRecord record = record_from_json_line(j.at("record").dump());

        EditResult result;
        if (mode == "identity") {
            SampleRecord out = record;
            out.id += instr.kind == EditKind::bias_edit ? "::be" : "::te";
            out.provenance = instr.kind == EditKind::bias_edit ? Provenance::bias_edit
                                                               : Provenance::target_edit;
            if (instr.kind == EditKind::target_edit && instr.target_class) {
                out.class_label = *instr.target_class;
            }
            result.record = std::move(out);
        } else if (mode == "tag") {
            result = mock_tag_edit(instr, record, tag_ctx, index);
        } else if (mode == "feature") {
            if (!feature_ctx) {
                throw ValidationError("edit-worker feature mode requires --truth");
            }
            result = mock_feature_edit(instr, record, *feature_ctx, index);
        } else {
            throw ValidationError("unknown worker mode \"" + mode + "\"");
        }
        if (!result.ok()) {
            std::cerr << "edit-worker: " << result.error << "\n";
            return 3;
        }
        std::cout << record_to_json_line(*result.record) << "\n";
        ++index;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dataset bias detection and counterfactual editing pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // synth
    std::string synth_config, synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic biased corpus");
    synth_cmd->add_option("--config", synth_config, "key=value config file")->required();
    synth_cmd->add_option("--out", synth_out, "output directory")->required();

    // detect
    std::string detect_corpus, detect_mode = "both", detect_out;
    int detect_top_k = 3, detect_multi_k = 0;
    std::int64_t detect_min_support = 1;
    unsigned detect_threads = 0;
    bool detect_exclude_class_names = false;
    std::vector<std::string> detect_exclusions;
    auto* detect_cmd = app.add_subcommand("detect", "detect per-class bias attributes");
    detect_cmd->add_option("--corpus", detect_corpus, "corpus JSONL")->required();
    detect_cmd->add_option("--mode", detect_mode, "both|mi_only|dependence_only");
    detect_cmd->add_option("--top-k", detect_top_k, "ranked candidates per class");
    detect_cmd->add_flag("--exclude-class-names", detect_exclude_class_names,
                         "exclude every class name from all candidate lists");
    detect_cmd->add_option("--exclude", detect_exclusions,
                           "exclusion `attr` or `class:attr` (repeatable)");
    detect_cmd->add_option("--multi-k", detect_multi_k, "detect the top k biases per class (>= 2)");
    detect_cmd->add_option("--min-support", detect_min_support,
                           "drop attributes occurring fewer times than this");
    detect_cmd->add_option("--threads", detect_threads, "counting threads (0 = auto)");
    detect_cmd->add_option("--out", detect_out, "bias report JSON")->required();

    // plan
    std::string plan_corpus, plan_report, plan_templates, plan_out;
    std::uint64_t plan_seed = 0;
    auto* plan_cmd = app.add_subcommand("plan", "plan bias and target edits");
    plan_cmd->add_option("--corpus", plan_corpus, "corpus JSONL")->required();
    plan_cmd->add_option("--report", plan_report, "bias report JSON")->required();
    plan_cmd->add_option("--seed", plan_seed, "sampling seed");
    plan_cmd->add_option("--templates", plan_templates, "instruction template file");
    plan_cmd->add_option("--out", plan_out, "plan JSONL")->required();

    // edit
    std::string edit_plan, edit_corpus, edit_backend, edit_report, edit_truth, edit_out;
    std::uint64_t edit_seed = 0;
    unsigned edit_jobs = 1;
    std::size_t edit_batch = 0;
    auto* edit_cmd = app.add_subcommand("edit", "apply planned edits with a backend");
    edit_cmd->add_option("--plan", edit_plan, "plan JSONL")->required();
    edit_cmd->add_option("--corpus", edit_corpus, "source corpus JSONL")->required();
    edit_cmd->add_option("--backend", edit_backend, "mock-tag|mock-feature|exec:<cmd>")->required();
    edit_cmd->add_option("--report", edit_report, "bias report (tag edit context)");
    edit_cmd->add_option("--truth", edit_truth, "truth manifest (required for mock-feature)");
    edit_cmd->add_option("--seed", edit_seed, "noise seed for mock-feature");
    edit_cmd->add_option("--jobs", edit_jobs, "concurrent editor subprocesses");
    edit_cmd->add_option("--batch-size", edit_batch, "instructions per subprocess batch");
    edit_cmd->add_option("--out", edit_out, "edited corpus JSONL")->required();

    // build
    std::string build_corpus, build_edited, build_variant = "full", build_out;
    std::uint64_t build_seed = 0;
    auto* build_cmd = app.add_subcommand("build", "assemble the augmented dataset");
    build_cmd->add_option("--corpus", build_corpus, "original corpus JSONL")->required();
    build_cmd->add_option("--edited", build_edited, "edited corpus JSONL")->required();
    build_cmd->add_option("--variant", build_variant, "full|sampled|be-only|te-only");
    build_cmd->add_option("--seed", build_seed, "sampling seed for the sampled variant");
    build_cmd->add_option("--out", build_out, "output corpus JSONL")->required();

    // train
    std::string train_train, train_val, train_test, train_report, train_out;
    int train_epochs = 100, train_batch = 64;
    double train_lr = 0.1;
    std::uint64_t train_seed = 0;
    auto* train_cmd = app.add_subcommand("train", "train the reference linear classifier");
    train_cmd->add_option("--train", train_train, "training corpus JSONL")->required();
    train_cmd->add_option("--val", train_val, "validation corpus JSONL")->required();
    train_cmd->add_option("--test", train_test, "test corpus JSONL")->required();
    train_cmd->add_option("--report", train_report, "bias report for test grouping");
    train_cmd->add_option("--epochs", train_epochs, "training epochs");
    train_cmd->add_option("--lr", train_lr, "learning rate");
    train_cmd->add_option("--batch", train_batch, "mini-batch size");
    train_cmd->add_option("--seed", train_seed, "shuffle seed");
    train_cmd->add_option("--out", train_out, "run directory")->required();

    // eval
    std::string eval_run, eval_protocol = "id_val", eval_report, eval_test, eval_predictions,
                eval_pred_test, eval_out;
    auto* eval_cmd = app.add_subcommand("eval", "select a checkpoint and report group metrics");
    eval_cmd->add_option("--run", eval_run, "run directory from `train`");
    eval_cmd->add_option("--protocol", eval_protocol, "id_val|best_bc");
    eval_cmd->add_option("--report", eval_report, "bias report for grouping");
    eval_cmd->add_option("--test-corpus", eval_test, "override the test corpus path");
    eval_cmd->add_option("--predictions", eval_predictions, "external predictions JSONL");
    eval_cmd->add_option("--test", eval_pred_test, "test corpus for --predictions mode");
    eval_cmd->add_option("--out", eval_out, "metrics JSON")->required();

    // report
    std::vector<std::string> report_runs;
    std::string report_out;
    auto* report_cmd = app.add_subcommand("report", "render a BC/BA/Avg comparison table");
    report_cmd->add_option("--runs", report_runs, "metrics.json files or run dirs")->required();
    report_cmd->add_option("--out", report_out, "markdown output")->required();

    // edit-worker
    std::string worker_mode = "identity", worker_report, worker_truth;
    std::uint64_t worker_seed = 0;
    auto* worker_cmd =
        app.add_subcommand("edit-worker", "stdio worker implementing the editor protocol");
    worker_cmd->add_option("--mode", worker_mode, "identity|tag|feature");
    worker_cmd->add_option("--report", worker_report, "bias report for tag context");
    worker_cmd->add_option("--truth", worker_truth, "truth manifest for feature mode");
    worker_cmd->add_option("--seed", worker_seed, "noise seed for feature mode");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth_config, synth_out);
        if (detect_cmd->parsed()) {
            return cmd_detect(detect_corpus, detect_mode, detect_top_k, detect_exclude_class_names,
                              detect_exclusions, detect_multi_k, detect_min_support,
                              detect_threads, detect_out);
        }
        if (plan_cmd->parsed()) {
            return cmd_plan(plan_corpus, plan_report, plan_seed, plan_templates, plan_out);
        }
        if (edit_cmd->parsed()) {
            return cmd_edit(edit_plan, edit_corpus, edit_backend, edit_report, edit_truth,
                            edit_seed, edit_jobs, edit_batch, edit_out);
        }
        if (build_cmd->parsed()) {
            return cmd_build(build_corpus, build_edited, build_variant, build_seed, build_out);
        }
        if (train_cmd->parsed()) {
            return cmd_train(train_train, train_val, train_test, train_report, train_epochs,
                             train_lr, train_batch, train_seed, train_out);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_run, eval_protocol, eval_report, eval_test, eval_predictions,
                            eval_pred_test, eval_out);
        }
        if (report_cmd->parsed()) return cmd_report(report_runs, report_out);
        if (worker_cmd->parsed()) {
            return cmd_edit_worker(worker_mode, worker_report, worker_truth, worker_seed);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
