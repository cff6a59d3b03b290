#include "debias/editor.hpp"

#include "debias/errors.hpp"
#include "debias/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace debias {

using ordered_json = nlohmann::ordered_json;

namespace {
constexpr std::uint64_t kFeatureNoiseDomain = 0xfea7edb5u;

std::string suffix_for(EditKind kind) {
    return kind == EditKind::bias_edit ? "::be" : "::te";
}

void replace_tag(std::vector<std::string>& tags, const std::string& from, const std::string& to) {
    bool removed = false;
    auto it = std::find(tags.begin(), tags.end(), from);
    if (it != tags.end()) {
        tags.erase(it);
        removed = true;
    }
    if (removed && !to.empty() &&
        std::find(tags.begin(), tags.end(), to) == tags.end()) {
        tags.push_back(to);
    }
    std::sort(tags.begin(), tags.end());
}

} // namespace

MockEditContext MockEditContext::from_report(const BiasReport& report) {
    MockEditContext ctx;
    for (const auto& [cls, det] : report.per_class) {
        if (!det.chosen.empty()) ctx.class_bias[cls] = det.chosen.front();
    }
    return ctx;
}

EditResult mock_tag_edit(const EditInstruction& instruction, const SampleRecord& record,
                         const MockEditContext& ctx, std::size_t index) {
    EditResult result;
    result.index = index;
    if (record.class_label != instruction.source_class) {
        result.error = "record \"" + record.id + "\" has class \"" + record.class_label +
                       "\" but instruction expects \"" + instruction.source_class + "\"";
        return result;
    }

    SampleRecord out = record;
    out.id = record.id + suffix_for(instruction.kind);

    if (instruction.kind == EditKind::bias_edit) {
        if (!instruction.source_bias || !instruction.replacement_bias) {
            result.error = "bias_edit for \"" + record.id + "\" missing bias fields";
            return result;
        }
        if (*instruction.source_bias == *instruction.replacement_bias) {
            result.warning = "bias_edit for \"" + record.id +
                             "\": replacement equals source bias; edit is a no-op";
        }
        replace_tag(out.tags, *instruction.source_bias, *instruction.replacement_bias);
        out.provenance = Provenance::bias_edit;
        out.truth_alignment = TruthAlignment::conflict;
    } else {
        if (!instruction.target_class) {
            result.error = "target_edit for \"" + record.id + "\" missing target class";
            return result;
        }
        const std::string& target = *instruction.target_class;
        auto from_kw = ctx.class_target_keyword.find(instruction.source_class);
        auto to_kw = ctx.class_target_keyword.find(target);
        if (from_kw != ctx.class_target_keyword.end() && to_kw != ctx.class_target_keyword.end()) {
            replace_tag(out.tags, from_kw->second, to_kw->second);
        }
        out.class_label = target;
        out.provenance = Provenance::target_edit;
        auto target_bias = ctx.class_bias.find(target);
        if (target_bias != ctx.class_bias.end()) {
            out.truth_alignment = out.has_tag(target_bias->second)
                                      ? TruthAlignment::aligned
                                      : TruthAlignment::conflict;
        } else {
            out.truth_alignment = std::nullopt;
        }
    }
    result.record = std::move(out);
    return result;
}

FeatureEditContext FeatureEditContext::from_truth_file(const std::filesystem::path& path,
                                                       std::uint64_t seed) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open truth manifest: " + path.string());
    }
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": JSON parse error: " + e.what());
    }
    FeatureEditContext ctx;
    ctx.seed = seed;
    try {
        for (const auto& c : j.at("classes")) {
            const std::string name = c.at("name").get<std::string>();
            ClassChannels ch;
            ch.target_value = c.at("target_value").get<double>();
            ch.bias_value = c.at("bias_value").get<double>();
            ctx.classes[name] = ch;
            ctx.tags.class_target_keyword[name] = c.at("target_keyword").get<std::string>();
            const auto& biases = c.at("biases");
            if (!biases.empty()) {
                const std::string b0 = biases.at(0).get<std::string>();
                ctx.tags.class_bias[name] = b0;
                ctx.bias_to_class[b0] = name;
            }
        }
        const auto& dims = j.at("feature_dims");
        ctx.dim_target = dims.at("target").get<std::size_t>();
        ctx.dim_bias = dims.at("bias").get<std::size_t>();
        ctx.dim_noise = dims.at("noise").get<std::size_t>();
        ctx.bias_blocks = dims.at("bias_blocks").get<int>();
        ctx.noise_sigma = j.at("noise_sigma").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": bad truth manifest: " + e.what());
    }
    return ctx;
}

EditResult mock_feature_edit(const EditInstruction& instruction, const SampleRecord& record,
                             const FeatureEditContext& ctx, std::size_t index) {
    EditResult result;
    result.index = index;
    if (!record.features.has_value()) {
        result.error = "record \"" + record.id + "\" has no features";
        return result;
    }
    const std::size_t expected_dim =
        ctx.dim_target + ctx.dim_bias * static_cast<std::size_t>(ctx.bias_blocks) + ctx.dim_noise;
    if (record.features->size() != expected_dim) {
        result.error = "record \"" + record.id + "\": feature dim " +
                       std::to_string(record.features->size()) + " != layout dim " +
                       std::to_string(expected_dim);
        return result;
    }

    // Tag semantics first; it also validates classes and bias fields.
    EditResult tagged = mock_tag_edit(instruction, record, ctx.tags, index);
    if (!tagged.ok()) return tagged;
    SampleRecord out = std::move(*tagged.record);
    result.warning = tagged.warning;
    std::vector<double>& f = *out.features;

    Rng rng = Rng::stream(ctx.seed, kFeatureNoiseDomain, index);
    if (instruction.kind == EditKind::bias_edit) {
        auto donor_it = ctx.bias_to_class.find(*instruction.replacement_bias);
        if (donor_it == ctx.bias_to_class.end()) {
            result.error = "replacement bias \"" + *instruction.replacement_bias +
                           "\" matches no known class";
            return result;
        }
        auto cls_it = ctx.classes.find(donor_it->second);
        if (cls_it == ctx.classes.end()) {
            result.error = "unknown class \"" + donor_it->second + "\" in feature map";
            return result;
        }
        for (std::size_t d = 0; d < ctx.dim_bias; ++d) {
            f[ctx.dim_target + d] = rng.normal(cls_it->second.bias_value, ctx.noise_sigma);
        }
    } else {
        auto cls_it = ctx.classes.find(*instruction.target_class);
        if (cls_it == ctx.classes.end()) {
            result.error = "unknown target class \"" + *instruction.target_class +
                           "\" in feature map";
            return result;
        }
        for (std::size_t d = 0; d < ctx.dim_target; ++d) {
            f[d] = rng.normal(cls_it->second.target_value, ctx.noise_sigma);
        }
    }
    result.record = std::move(out);
    return result;
}

std::vector<EditResult> MockTagEditor::apply_batch(const std::vector<EditJob>& jobs) {
    std::vector<EditResult> results;
    results.reserve(jobs.size());
    for (const EditJob& job : jobs) {
        results.push_back(mock_tag_edit(job.instruction, job.record, ctx_, job.index));
    }
    return results;
}

std::vector<EditResult> MockFeatureEditor::apply_batch(const std::vector<EditJob>& jobs) {
    std::vector<EditResult> results;
    results.reserve(jobs.size());
    for (const EditJob& job : jobs) {
        results.push_back(mock_feature_edit(job.instruction, job.record, ctx_, job.index));
    }
    return results;
}

std::string protocol_line(const EditJob& job) {
    ordered_json j;
    j["instruction"] = ordered_json::parse(instruction_to_json_line(job.instruction));
    j["record"] = ordered_json::parse(record_to_json_line(job.record));
    return j.dump();
}

ExternalEditor::ExternalEditor(std::string command, ExternalEditorOptions options)
    : command_(std::move(command)), options_(options) {
    if (const char* env = std::getenv("STAB_EDITOR_TIMEOUT_SECS")) {
        char* end = nullptr;
        double v = std::strtod(env, &end);
        if (end != env && v > 0) options_.timeout_secs = v;
    }
    if (options_.jobs == 0) options_.jobs = 1;
}

namespace {

struct ChildProcess {
    pid_t pid = -1;
    int stdin_fd = -1;
    int stdout_fd = -1;
};

ChildProcess spawn_shell(const std::string& command) {
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
        throw BackendError("cannot create pipes: " + std::string(std::strerror(errno)));
    }
    pid_t pid = fork();
    if (pid < 0) {
        throw BackendError("fork failed: " + std::string(std::strerror(errno)));
    }
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    ChildProcess child;
    child.pid = pid;
    child.stdin_fd = in_pipe[1];
    child.stdout_fd = out_pipe[0];
    return child;
}

std::vector<EditResult> fail_batch(const std::vector<EditJob>& jobs, const std::string& why) {
    std::vector<EditResult> results;
    results.reserve(jobs.size());
    for (const EditJob& job : jobs) {
        EditResult r;
        r.index = job.index;
        r.error = why;
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace

std::vector<EditResult> ExternalEditor::run_one_batch(const std::vector<EditJob>& jobs) const {
    if (jobs.empty()) return {};

    // A child that exits without draining stdin must surface as a write
    // error, not kill the whole process.
    static const bool sigpipe_ignored = [] {
        signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)sigpipe_ignored;

    std::string input;
    for (const EditJob& job : jobs) {
        input += protocol_line(job);
        input += '\n';
    }

    ChildProcess child;
    try {
        child = spawn_shell(command_);
    } catch (const BackendError& e) {
        return fail_batch(jobs, e.what());
    }

    fcntl(child.stdin_fd, F_SETFL, O_NONBLOCK);
    fcntl(child.stdout_fd, F_SETFL, O_NONBLOCK);

    std::string output;
    std::size_t written = 0;
    bool timed_out = false;
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::milliseconds(static_cast<long>(options_.timeout_secs * 1000));

    while (true) {
        struct pollfd fds[2];
        nfds_t nfds = 0;
        int out_slot = -1;
        int in_slot = -1;
        if (child.stdout_fd >= 0) {
            out_slot = static_cast<int>(nfds);
            fds[nfds++] = {child.stdout_fd, POLLIN, 0};
        }
        if (child.stdin_fd >= 0 && written < input.size()) {
            in_slot = static_cast<int>(nfds);
            fds[nfds++] = {child.stdin_fd, POLLOUT, 0};
        } else if (child.stdin_fd >= 0) {
            close(child.stdin_fd);
            child.stdin_fd = -1;
        }
        if (child.stdout_fd < 0) break;

        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                             deadline - std::chrono::steady_clock::now())
                             .count();
        if (remaining <= 0) {
            timed_out = true;
            break;
        }
        int rc = poll(fds, nfds, static_cast<int>(std::min<long long>(remaining, 1000)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (in_slot >= 0 && (fds[in_slot].revents & (POLLOUT | POLLERR | POLLHUP))) {
            ssize_t n = write(child.stdin_fd, input.data() + written, input.size() - written);
            if (n > 0) {
                written += static_cast<std::size_t>(n);
                if (written == input.size()) {
                    close(child.stdin_fd);
                    child.stdin_fd = -1;
                }
            } else if (n < 0 && errno != EAGAIN && errno != EINTR) {
                // Child closed stdin early; keep draining its output.
                close(child.stdin_fd);
                child.stdin_fd = -1;
            }
        }
        if (out_slot >= 0 && (fds[out_slot].revents & (POLLIN | POLLHUP))) {
            char buf[65536];
            ssize_t n = read(child.stdout_fd, buf, sizeof(buf));
            if (n > 0) {
                output.append(buf, static_cast<std::size_t>(n));
            } else if (n == 0) {
                close(child.stdout_fd);
                child.stdout_fd = -1;
            } else if (errno != EAGAIN && errno != EINTR) {
                close(child.stdout_fd);
                child.stdout_fd = -1;
            }
        }
    }

    if (child.stdin_fd >= 0) close(child.stdin_fd);
    if (child.stdout_fd >= 0) close(child.stdout_fd);

    int status = 0;
    if (timed_out) {
        kill(child.pid, SIGKILL);
        waitpid(child.pid, &status, 0);
        return fail_batch(jobs, "editor command timed out after " +
                                    std::to_string(options_.timeout_secs) + "s");
    }
    waitpid(child.pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        return fail_batch(jobs, "editor command exited with status " + std::to_string(code));
    }

    std::vector<std::string> lines;
    std::istringstream stream(output);
    std::string line;
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        lines.push_back(line);
    }
    if (lines.size() != jobs.size()) {
        return fail_batch(jobs, "protocol violation: expected " + std::to_string(jobs.size()) +
                                    " output lines, got " + std::to_string(lines.size()));
    }

    std::vector<EditResult> results;
    results.reserve(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        EditResult r;
        r.index = jobs[i].index;
        try {
            r.record = record_from_json_line(lines[i]);
        } catch (const std::exception& e) {
            r.error = std::string("protocol violation: bad record line: ") + e.what();
        }
        results.push_back(std::move(r));
    }
    return results;
}

std::vector<EditResult> ExternalEditor::apply_batch(const std::vector<EditJob>& jobs) {
    if (jobs.empty()) return {};
    std::size_t batch_size = options_.batch_size;
    if (batch_size == 0) {
        batch_size = (jobs.size() + options_.jobs - 1) / options_.jobs;
    }
    std::vector<std::vector<EditJob>> batches;
    for (std::size_t off = 0; off < jobs.size(); off += batch_size) {
        const std::size_t end = std::min(off + batch_size, jobs.size());
        batches.emplace_back(jobs.begin() + static_cast<std::ptrdiff_t>(off),
                             jobs.begin() + static_cast<std::ptrdiff_t>(end));
    }

    std::vector<std::vector<EditResult>> batch_results(batches.size());
    std::size_t next_batch = 0;
    std::mutex mu;
    auto worker = [&] {
        while (true) {
            std::size_t b;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next_batch >= batches.size()) return;
                b = next_batch++;
            }
            batch_results[b] = run_one_batch(batches[b]);
        }
    };
    const unsigned n_workers =
        std::min<unsigned>(options_.jobs, static_cast<unsigned>(batches.size()));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (unsigned w = 0; w < n_workers; ++w) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }

    // Restore plan order by instruction index.
    std::vector<EditResult> results;
    results.reserve(jobs.size());
    for (std::vector<EditResult>& br : batch_results) {
        for (EditResult& r : br) results.push_back(std::move(r));
    }
    std::sort(results.begin(), results.end(),
              [](const EditResult& a, const EditResult& b) { return a.index < b.index; });
    return results;
}

std::unique_ptr<EditorBackend> make_backend(const std::string& spec, const MockEditContext& tag_ctx,
                                            const std::optional<FeatureEditContext>& feature_ctx,
                                            const ExternalEditorOptions& options) {
    if (spec == "mock-tag") {
        return std::make_unique<MockTagEditor>(tag_ctx);
    }
    if (spec == "mock-feature") {
        if (!feature_ctx.has_value()) {
            throw ValidationError("mock-feature backend requires a truth manifest (--truth)");
        }
        return std::make_unique<MockFeatureEditor>(*feature_ctx);
    }
    if (spec.rfind("exec:", 0) == 0) {
        const std::string command = spec.substr(5);
        if (command.empty()) {
            throw ValidationError("exec backend requires a command: exec:<cmd>");
        }
        return std::make_unique<ExternalEditor>(command, options);
    }
    throw ValidationError("unknown backend \"" + spec +
                          "\" (expected mock-tag, mock-feature or exec:<cmd>)");
}

} // namespace debias
