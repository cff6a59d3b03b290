#include "debias/eval.hpp"

#include "debias/digest.hpp"
#include "debias/errors.hpp"
#include "debias/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace debias {

using ordered_json = nlohmann::ordered_json;

namespace {
constexpr std::uint64_t kShuffleDomain = 0x5aff1e00u;
} // namespace

TruthAlignment alignment_of(const SampleRecord& record, const BiasReport* report) {
    if (report != nullptr) {
        if (auto bias = report->chosen_bias(record.class_label)) {
            return record.has_tag(*bias) ? TruthAlignment::aligned : TruthAlignment::conflict;
        }
    }
    if (record.truth_alignment.has_value()) {
        return *record.truth_alignment;
    }
    throw ValidationError("record \"" + record.id +
                          "\": no detected bias for class \"" + record.class_label +
                          "\" and no ground-truth alignment");
}

std::map<std::string, TruthAlignment> alignment_map(const Corpus& corpus,
                                                    const BiasReport* report) {
    std::map<std::string, TruthAlignment> out;
    for (const SampleRecord& r : corpus.records) {
        out.emplace(r.id, alignment_of(r, report));
    }
    return out;
}

GroupMetrics group_accuracy(const std::map<std::string, std::string>& predictions,
                            const Corpus& test,
                            const std::map<std::string, TruthAlignment>& alignment) {
    GroupMetrics m;
    std::int64_t bc_correct = 0;
    std::int64_t ba_correct = 0;
    for (const SampleRecord& r : test.records) {
        auto pred = predictions.find(r.id);
        if (pred == predictions.end()) {
            throw ValidationError("missing prediction for record \"" + r.id + "\"");
        }
        auto group = alignment.find(r.id);
        if (group == alignment.end()) {
            throw ValidationError("missing alignment for record \"" + r.id + "\"");
        }
        const bool correct = pred->second == r.class_label;
        if (group->second == TruthAlignment::conflict) {
            m.n_bc += 1;
            bc_correct += correct ? 1 : 0;
        } else {
            m.n_ba += 1;
            ba_correct += correct ? 1 : 0;
        }
    }
    if (m.n_bc == 0 || m.n_ba == 0) {
        throw ValidationError("group accuracy needs both groups nonempty (bc=" +
                              std::to_string(m.n_bc) + ", ba=" + std::to_string(m.n_ba) + ")");
    }
    m.bc_acc = static_cast<double>(bc_correct) / static_cast<double>(m.n_bc);
    m.ba_acc = static_cast<double>(ba_correct) / static_cast<double>(m.n_ba);
    m.avg = (m.bc_acc + m.ba_acc) / 2.0;
    return m;
}

std::size_t LinearModel::predict_index(const std::vector<double>& features) const {
    std::size_t best = 0;
    double best_score = -1e308;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        double s = bias[c];
        const double* w = weights.data() + c * dim;
        for (std::size_t d = 0; d < dim; ++d) s += w[d] * features[d];
        if (s > best_score) {
            best_score = s;
            best = c;
        }
    }
    return best;
}

const std::string& LinearModel::predict(const std::vector<double>& features) const {
    return classes[predict_index(features)];
}

std::string LinearModel::to_json(int epoch) const {
    ordered_json j;
    j["epoch"] = epoch;
    j["classes"] = classes;
    j["dim"] = dim;
    ordered_json rows = ordered_json::array();
    for (std::size_t c = 0; c < classes.size(); ++c) {
        rows.push_back(std::vector<double>(weights.begin() + c * dim,
                                           weights.begin() + (c + 1) * dim));
    }
    j["weights"] = std::move(rows);
    j["bias"] = bias;
    j["trained_on"] = trained_on;
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

LinearModel LinearModel::from_json(const std::string& bytes) {
    ordered_json j;
    try {
        j = ordered_json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("model snapshot: JSON parse error: ") + e.what());
    }
    LinearModel m;
    try {
        m.classes = j.at("classes").get<std::vector<std::string>>();
        m.dim = j.at("dim").get<std::size_t>();
        for (const auto& row : j.at("weights")) {
            auto v = row.get<std::vector<double>>();
            m.weights.insert(m.weights.end(), v.begin(), v.end());
        }
        m.bias = j.at("bias").get<std::vector<double>>();
        m.trained_on = j.at("trained_on").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("model snapshot: ") + e.what());
    }
    if (m.weights.size() != m.classes.size() * m.dim || m.bias.size() != m.classes.size()) {
        throw ValidationError("model snapshot: inconsistent shapes");
    }
    return m;
}

namespace {

double accuracy_on(const LinearModel& model, const Corpus& corpus,
                   const std::vector<std::size_t>& class_of_record) {
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        if (model.predict_index(*corpus.records[i].features) == class_of_record[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(corpus.records.size());
}

std::vector<std::size_t> class_indices(const Corpus& corpus,
                                       const std::vector<std::string>& classes) {
    std::map<std::string, std::size_t> index;
    for (std::size_t c = 0; c < classes.size(); ++c) index[classes[c]] = c;
    std::vector<std::size_t> out;
    out.reserve(corpus.records.size());
    for (const SampleRecord& r : corpus.records) {
        auto it = index.find(r.class_label);
        if (it == index.end()) {
            throw ValidationError("corpus class \"" + r.class_label +
                                  "\" not present in the training class set");
        }
        out.push_back(it->second);
    }
    return out;
}

void require_features(const Corpus& corpus, const char* which) {
    for (const SampleRecord& r : corpus.records) {
        if (!r.features.has_value()) {
            throw ValidationError(std::string(which) + " corpus record \"" + r.id +
                                  "\" has no features");
        }
    }
}

} // namespace

TrainResult train_linear(const Corpus& train, const Corpus& val, const Corpus& test,
                         const TrainConfig& config,
                         const std::map<std::string, TruthAlignment>& test_alignment) {
    require_features(train, "train");
    require_features(val, "val");
    require_features(test, "test");
    if (config.epochs < 1 || config.batch < 1 || config.lr <= 0.0) {
        throw ValidationError("train config: epochs/batch must be >= 1 and lr > 0");
    }

    const std::vector<std::string>& classes = train.class_set;
    const std::size_t n_classes = classes.size();
    const std::size_t dim = train.records.front().features->size();

    LinearModel model;
    model.classes = classes;
    model.dim = dim;
    model.weights.assign(n_classes * dim, 0.0);
    model.bias.assign(n_classes, 0.0);
    model.trained_on = digest_string(corpus_to_jsonl(train));
    model.seed = config.seed;

    const std::vector<std::size_t> train_y = class_indices(train, classes);
    const std::vector<std::size_t> val_y = class_indices(val, classes);
    const std::vector<std::size_t> test_y = class_indices(test, classes);

    TrainResult result;
    for (const SampleRecord& r : test.records) {
        auto it = test_alignment.find(r.id);
        if (it == test_alignment.end()) {
            throw ValidationError("missing alignment for test record \"" + r.id + "\"");
        }
        if (it->second == TruthAlignment::conflict) {
            result.n_bc += 1;
        } else {
            result.n_ba += 1;
        }
    }

    std::vector<std::size_t> order(train.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> logits(n_classes);
    std::vector<double> probs(n_classes);
    std::vector<double> grad_w(n_classes * dim);
    std::vector<double> grad_b(n_classes);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng rng = Rng::stream(config.seed, kShuffleDomain, static_cast<std::uint64_t>(epoch));
        rng.shuffle(order);

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch));
            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            std::fill(grad_b.begin(), grad_b.end(), 0.0);

            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                const std::vector<double>& x = *train.records[i].features;
                double max_logit = -1e308;
                for (std::size_t c = 0; c < n_classes; ++c) {
                    double s = model.bias[c];
                    const double* w = model.weights.data() + c * dim;
                    for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[d];
                    logits[c] = s;
                    max_logit = std::max(max_logit, s);
                }
                double z = 0.0;
                for (std::size_t c = 0; c < n_classes; ++c) {
                    probs[c] = std::exp(logits[c] - max_logit);
                    z += probs[c];
                }
                for (std::size_t c = 0; c < n_classes; ++c) {
                    double g = probs[c] / z - (c == train_y[i] ? 1.0 : 0.0);
                    if (std::isnan(g)) {
                        throw ValidationError("NaN loss at epoch " + std::to_string(epoch));
                    }
                    grad_b[c] += g;
                    double* gw = grad_w.data() + c * dim;
                    for (std::size_t d = 0; d < dim; ++d) gw[d] += g * x[d];
                }
            }
            const double scale = config.lr / static_cast<double>(end - start);
            for (std::size_t c = 0; c < n_classes; ++c) {
                model.bias[c] -= scale * grad_b[c];
                double* w = model.weights.data() + c * dim;
                const double* gw = grad_w.data() + c * dim;
                for (std::size_t d = 0; d < dim; ++d) w[d] -= scale * gw[d];
            }
        }

        TraceRow row;
        row.epoch = epoch;
        row.id_val_acc = accuracy_on(model, val, val_y);
        std::int64_t bc_correct = 0;
        std::int64_t ba_correct = 0;
        for (std::size_t i = 0; i < test.records.size(); ++i) {
            const SampleRecord& r = test.records[i];
            const bool correct = model.predict_index(*r.features) == test_y[i];
            if (test_alignment.at(r.id) == TruthAlignment::conflict) {
                bc_correct += correct ? 1 : 0;
            } else {
                ba_correct += correct ? 1 : 0;
            }
        }
        row.test_bc_acc = result.n_bc > 0
                              ? static_cast<double>(bc_correct) / static_cast<double>(result.n_bc)
                              : 0.0;
        row.test_ba_acc = result.n_ba > 0
                              ? static_cast<double>(ba_correct) / static_cast<double>(result.n_ba)
                              : 0.0;
        row.snapshot_digest = digest_string(model.to_json(epoch));
        result.trace.push_back(row);
        result.snapshots.push_back(model);
    }
    return result;
}

const char* to_string(Protocol p) { return p == Protocol::id_val ? "id_val" : "best_bc"; }

Protocol protocol_from_string(const std::string& s) {
    if (s == "id_val") return Protocol::id_val;
    if (s == "best_bc" || s == "best_bc_test") return Protocol::best_bc_test;
    throw ValidationError("unknown protocol: \"" + s + "\" (expected id_val or best_bc)");
}

std::size_t select_checkpoint(const std::vector<TraceRow>& trace, Protocol protocol) {
    if (trace.empty()) {
        throw ValidationError("select_checkpoint: empty trace");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const double cur = protocol == Protocol::id_val ? trace[i].id_val_acc : trace[i].test_bc_acc;
        const double rec =
            protocol == Protocol::id_val ? trace[best].id_val_acc : trace[best].test_bc_acc;
        if (cur > rec) best = i;  // strict: ties keep the earliest epoch
    }
    return best;
}

GroupMetrics metrics_at(const TrainResult& result, std::size_t trace_index) {
    const TraceRow& row = result.trace.at(trace_index);
    GroupMetrics m;
    m.bc_acc = row.test_bc_acc;
    m.ba_acc = row.test_ba_acc;
    m.avg = (m.bc_acc + m.ba_acc) / 2.0;
    m.n_bc = result.n_bc;
    m.n_ba = result.n_ba;
    return m;
}

std::map<std::string, std::string> predict_all(const LinearModel& model, const Corpus& corpus) {
    std::map<std::string, std::string> out;
    for (const SampleRecord& r : corpus.records) {
        if (!r.features.has_value()) {
            throw ValidationError("record \"" + r.id + "\" has no features to predict from");
        }
        out[r.id] = model.predict(*r.features);
    }
    return out;
}

std::string trace_to_jsonl(const std::vector<TraceRow>& trace) {
    std::string out;
    for (const TraceRow& row : trace) {
        ordered_json j;
        j["epoch"] = row.epoch;
        j["id_val_acc"] = row.id_val_acc;
        j["test_bc_acc"] = row.test_bc_acc;
        j["test_ba_acc"] = row.test_ba_acc;
        j["snapshot_digest"] = row.snapshot_digest;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<TraceRow> trace_from_jsonl(const std::string& bytes) {
    std::vector<TraceRow> trace;
    std::istringstream in(bytes);
    std::string line;
    int last_epoch = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(std::string("trace: JSON parse error: ") + e.what());
        }
        TraceRow row;
        row.epoch = j.at("epoch").get<int>();
        row.id_val_acc = j.at("id_val_acc").get<double>();
        row.test_bc_acc = j.at("test_bc_acc").get<double>();
        row.test_ba_acc = j.at("test_ba_acc").get<double>();
        row.snapshot_digest = j.value("snapshot_digest", "");
        if (row.epoch <= last_epoch) {
            throw ValidationError("trace: epochs must be strictly increasing");
        }
        last_epoch = row.epoch;
        trace.push_back(std::move(row));
    }
    return trace;
}

std::map<std::string, std::string> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open predictions file: " + path.string());
    }
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            ordered_json j = ordered_json::parse(line);
            out[j.at("id").get<std::string>()] = j.at("predicted").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace debias
