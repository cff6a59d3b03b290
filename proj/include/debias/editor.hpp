#pragma once

#include "debias/corpus.hpp"
#include "debias/editplan.hpp"
#include "debias/stab.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace debias {

struct EditJob {
    std::size_t index = 0;  // position in the plan; keys per-record noise streams
    EditInstruction instruction;
    SampleRecord record;
};

struct EditResult {
    std::size_t index = 0;
    std::optional<SampleRecord> record;  // absent on failure
    std::string error;                   // non-empty on failure
    std::string warning;                 // e.g. degenerate no-op edits

    bool ok() const { return record.has_value(); }
};

/// Pluggable edit application. Mock backends are pure; the external
/// backend shells out over a line-delimited JSON stdio protocol.
class EditorBackend {
public:
    virtual ~EditorBackend() = default;
    virtual std::string name() const = 0;
    virtual std::vector<EditResult> apply_batch(const std::vector<EditJob>& jobs) = 0;
};

/// Class-level context the tag-space mock needs: per-class detected bias
/// (for alignment of target-edited outputs) and per-class target keyword
/// (renamed when the class changes).
struct MockEditContext {
    std::map<std::string, std::string> class_bias;
    std::map<std::string, std::string> class_target_keyword;

    static MockEditContext from_report(const BiasReport& report);
};

/// Tag-space realization of the two edit kinds. Appends "::be" / "::te"
/// to the id and stamps provenance; deterministic.
EditResult mock_tag_edit(const EditInstruction& instruction, const SampleRecord& record,
                         const MockEditContext& ctx, std::size_t index = 0);

/// Feature-channel layout and canonical per-class values, normally read
/// from a generated truth manifest.
struct FeatureEditContext {
    struct ClassChannels {
        double target_value = 0.0;
        double bias_value = 0.0;
    };
    std::map<std::string, ClassChannels> classes;
    std::map<std::string, std::string> bias_to_class;  // rank-0 bias keyword -> class
    MockEditContext tags;
    std::size_t dim_target = 0;
    std::size_t dim_bias = 0;   // one block
    std::size_t dim_noise = 0;
    int bias_blocks = 1;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    static FeatureEditContext from_truth_file(const std::filesystem::path& path,
                                              std::uint64_t seed);
};

/// Feature-channel realization: bias edits rewrite the first bias block
/// to the replacement class's canonical value plus fresh seeded noise;
/// target edits rewrite the target block and the class label. Tag edits
/// are applied as in mock_tag_edit.
EditResult mock_feature_edit(const EditInstruction& instruction, const SampleRecord& record,
                             const FeatureEditContext& ctx, std::size_t index);

class MockTagEditor : public EditorBackend {
public:
    explicit MockTagEditor(MockEditContext ctx) : ctx_(std::move(ctx)) {}
    std::string name() const override { return "mock-tag"; }
    std::vector<EditResult> apply_batch(const std::vector<EditJob>& jobs) override;

private:
    MockEditContext ctx_;
};

class MockFeatureEditor : public EditorBackend {
public:
    explicit MockFeatureEditor(FeatureEditContext ctx) : ctx_(std::move(ctx)) {}
    std::string name() const override { return "mock-feature"; }
    std::vector<EditResult> apply_batch(const std::vector<EditJob>& jobs) override;

private:
    FeatureEditContext ctx_;
};

struct ExternalEditorOptions {
    unsigned jobs = 1;             // concurrent subprocesses
    std::size_t batch_size = 0;    // 0 = split evenly across jobs
    double timeout_secs = 300.0;   // per batch; STAB_EDITOR_TIMEOUT_SECS overrides
};

/// Spawns `command` through /bin/sh per batch, writes one
/// {"instruction":..., "record":...} JSON line per job to its stdin and
/// reads one edited record line per job from its stdout, order-preserving.
class ExternalEditor : public EditorBackend {
public:
    ExternalEditor(std::string command, ExternalEditorOptions options = {});
    std::string name() const override { return "exec:" + command_; }
    std::vector<EditResult> apply_batch(const std::vector<EditJob>& jobs) override;

private:
    std::vector<EditResult> run_one_batch(const std::vector<EditJob>& jobs) const;

    std::string command_;
    ExternalEditorOptions options_;
};

std::unique_ptr<EditorBackend> make_backend(const std::string& spec, const MockEditContext& tag_ctx,
                                            const std::optional<FeatureEditContext>& feature_ctx,
                                            const ExternalEditorOptions& options);

std::string protocol_line(const EditJob& job);

} // namespace debias
