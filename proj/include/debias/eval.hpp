#pragma once

#include "debias/corpus.hpp"
#include "debias/stab.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace debias {

struct GroupMetrics {
    double bc_acc = 0.0;
    double ba_acc = 0.0;
    double avg = 0.0;  // arithmetic mean of the two group accuracies
    std::int64_t n_bc = 0;
    std::int64_t n_ba = 0;
};

/// Group of a record w.r.t. its class's detected bias: aligned when the
/// bias attribute is present in the tag set. Falls back to the record's
/// ground-truth alignment when the report does not cover the class.
TruthAlignment alignment_of(const SampleRecord& record, const BiasReport* report);

/// Builds the id -> group map for a whole corpus.
std::map<std::string, TruthAlignment> alignment_map(const Corpus& corpus,
                                                    const BiasReport* report);

GroupMetrics group_accuracy(const std::map<std::string, std::string>& predictions,
                            const Corpus& test,
                            const std::map<std::string, TruthAlignment>& alignment);

/// Multinomial logistic regression, zero-initialized, trained by
/// mini-batch gradient descent on cross-entropy. Single-threaded and
/// bit-deterministic for a fixed seed.
struct LinearModel {
    std::vector<std::string> classes;
    std::size_t dim = 0;
    std::vector<double> weights;  // row-major |C| x dim
    std::vector<double> bias;     // |C|
    std::string trained_on;       // training corpus digest
    std::uint64_t seed = 0;

    std::size_t predict_index(const std::vector<double>& features) const;
    const std::string& predict(const std::vector<double>& features) const;
    std::string to_json(int epoch) const;
    static LinearModel from_json(const std::string& bytes);
};

struct TrainConfig {
    int epochs = 100;
    double lr = 0.1;
    int batch = 64;
    std::uint64_t seed = 0;
};

struct TraceRow {
    int epoch = 0;  // 1-based
    double id_val_acc = 0.0;
    double test_bc_acc = 0.0;
    double test_ba_acc = 0.0;
    std::string snapshot_digest;
};

struct TrainResult {
    std::vector<LinearModel> snapshots;  // one per epoch
    std::vector<TraceRow> trace;
    std::int64_t n_bc = 0;
    std::int64_t n_ba = 0;
};

TrainResult train_linear(const Corpus& train, const Corpus& val, const Corpus& test,
                         const TrainConfig& config,
                         const std::map<std::string, TruthAlignment>& test_alignment);

enum class Protocol { id_val, best_bc_test };

const char* to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

/// Checkpoint selection: id_val maximizes validation accuracy,
/// best_bc_test maximizes bias-conflict test accuracy; ties go to the
/// earliest epoch. Returns an index into the trace.
std::size_t select_checkpoint(const std::vector<TraceRow>& trace, Protocol protocol);

GroupMetrics metrics_at(const TrainResult& result, std::size_t trace_index);

std::map<std::string, std::string> predict_all(const LinearModel& model, const Corpus& corpus);

std::string trace_to_jsonl(const std::vector<TraceRow>& trace);
std::vector<TraceRow> trace_from_jsonl(const std::string& bytes);

std::map<std::string, std::string> load_predictions(const std::filesystem::path& path);

} // namespace debias
