#include "debias/synth.hpp"

#include "debias/errors.hpp"
#include "debias/kv_config.hpp"
#include "debias/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace debias {

using ordered_json = nlohmann::ordered_json;

namespace {
enum Split : std::uint64_t { kTrain = 1, kVal = 2, kTest = 3 };

// Per-class signature in [-1, 1]; class 0 sits at +1 so its channels are
// positive, later classes march toward -1.
double class_signature(std::size_t ci, std::size_t n_classes) {
    if (n_classes <= 1) return 1.0;
    return 1.0 - 2.0 * static_cast<double>(ci) / static_cast<double>(n_classes - 1);
}

std::string record_id(const char* split, const std::string& cls, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d", i);
    return std::string(split) + "-" + cls + "-" + buf;
}
} // namespace

SynthConfig SynthConfig::from_file(const std::filesystem::path& path) {
    KvConfig cfg = KvConfig::parse_file(path);
    SynthConfig c;
    for (const std::string& spec : cfg.get_list("classes")) {
        std::vector<std::string> parts = split(spec, ':');
        if (parts.size() < 3) {
            throw ValidationError(path.string() +
                                  ": class spec must be name:target:bias[:extra...]: " + spec);
        }
        SynthClassSpec cls;
        cls.name = trim(parts[0]);
        cls.target_keyword = trim(parts[1]);
        for (std::size_t i = 2; i < parts.size(); ++i) cls.biases.push_back(trim(parts[i]));
        c.classes.push_back(std::move(cls));
    }
    c.samples_per_class = static_cast<int>(cfg.get_int("samples_per_class", 100));
    c.rho = cfg.get_double("rho", 0.0);
    c.noise_vocab_size = static_cast<int>(cfg.get_int("noise_vocab_size", 0));
    c.noise_tag_prob = cfg.get_double("noise_tag_prob", 0.0);
    for (const std::string& spec : cfg.get_list("rare_attrs")) {
        std::vector<std::string> parts = split(spec, ':');
        if (parts.size() != 3) {
            throw ValidationError(path.string() + ": rare attr spec must be class:attr:count: " + spec);
        }
        c.rare_attrs.push_back(
            {trim(parts[0]), trim(parts[1]), std::atoi(trim(parts[2]).c_str())});
    }
    if (cfg.has("feature_dims")) {
        std::vector<std::string> parts = split(cfg.get_str("feature_dims"), ':');
        if (parts.size() != 3) {
            throw ValidationError(path.string() + ": feature_dims must be target:bias:noise");
        }
        c.dim_target = static_cast<std::size_t>(std::atoll(trim(parts[0]).c_str()));
        c.dim_bias = static_cast<std::size_t>(std::atoll(trim(parts[1]).c_str()));
        c.dim_noise = static_cast<std::size_t>(std::atoll(trim(parts[2]).c_str()));
    }
    c.mu_target = cfg.get_double("mu_target", c.mu_target);
    c.mu_bias = cfg.get_double("mu_bias", c.mu_bias);
    c.noise_sigma = cfg.get_double("noise_sigma", c.noise_sigma);
    c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    c.bias_blocks = static_cast<int>(cfg.get_int("bias_blocks", 1));
    c.validate();
    return c;
}

void SynthConfig::validate() const {
    if (classes.empty()) {
        throw ValidationError("synth config: at least one class required");
    }
    if (samples_per_class < 1) {
        throw ValidationError("synth config: samples_per_class must be >= 1");
    }
    if (rho < 0.0 || rho > 1.0) {
        throw ValidationError("synth config: rho must be in [0, 1]");
    }
    if (has_features() && !(mu_bias > mu_target && mu_target > 0.0)) {
        throw ValidationError("synth config: requires mu_bias > mu_target > 0");
    }
    if (noise_tag_prob < 0.0 || noise_tag_prob > 1.0) {
        throw ValidationError("synth config: noise_tag_prob must be in [0, 1]");
    }
    if (bias_blocks < 1) {
        throw ValidationError("synth config: bias_blocks must be >= 1");
    }
    for (const SynthClassSpec& cls : classes) {
        if (cls.name.empty() || cls.target_keyword.empty()) {
            throw ValidationError("synth config: class name and target keyword must be nonempty");
        }
        if (static_cast<int>(cls.biases.size()) < bias_blocks) {
            throw ValidationError("synth config: class \"" + cls.name + "\" has " +
                                  std::to_string(cls.biases.size()) + " bias keywords but " +
                                  std::to_string(bias_blocks) + " blocks are planted");
        }
    }
    for (const RareAttrSpec& ra : rare_attrs) {
        bool found = false;
        for (const SynthClassSpec& cls : classes) found = found || cls.name == ra.class_name;
        if (!found) {
            throw ValidationError("synth config: rare attr names unknown class \"" +
                                  ra.class_name + "\"");
        }
        if (ra.count < 0 || ra.count > samples_per_class) {
            throw ValidationError("synth config: rare attr count out of range for \"" +
                                  ra.attribute + "\"");
        }
    }
}

SynthConfig multi_bias_config(const SynthConfig& base, int k) {
    if (k < 2) {
        throw ValidationError("multi_bias_config: k must be >= 2");
    }
    for (const SynthClassSpec& cls : base.classes) {
        if (static_cast<int>(cls.biases.size()) < k) {
            throw ValidationError("multi_bias_config: class \"" + cls.name + "\" has only " +
                                  std::to_string(cls.biases.size()) + " bias keywords");
        }
    }
    SynthConfig cfg = base;
    cfg.bias_blocks = k;
    return cfg;
}

namespace {

struct GenState {
    const SynthConfig& cfg;
    std::vector<std::string> noise_vocab;
    std::map<std::string, std::map<std::string, std::int64_t>> realized_conflicts;
};

// One record. `aligned_override`: -1 = draw per block with P(conflict)=rho,
// 0 = force conflict on every block, 1 = force aligned.
SampleRecord make_record(GenState& st, Split split, const char* split_name, std::size_t ci,
                         int i, int aligned_override, std::uint64_t stream_index) {
    const SynthConfig& cfg = st.cfg;
    const SynthClassSpec& cls = cfg.classes[ci];
    const std::size_t n_classes = cfg.classes.size();
    Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(split) << 32, stream_index);

    SampleRecord r;
    r.id = record_id(split_name, cls.name, i);
    r.class_label = cls.name;
    r.provenance = Provenance::original;
    r.tags.push_back(cls.target_keyword);

    // Donor class per bias block; the record is a conflict sample when the
    // rank-0 block carries another class's bias.
    std::vector<std::size_t> donors(static_cast<std::size_t>(cfg.bias_blocks), ci);
    for (std::size_t b = 0; b < donors.size(); ++b) {
        bool conflict;
        if (aligned_override < 0) {
            conflict = n_classes > 1 && rng.bernoulli(cfg.rho);
        } else {
            conflict = aligned_override == 0 && n_classes > 1;
        }
        if (conflict) {
            std::size_t other = rng.below(n_classes - 1);
            donors[b] = other >= ci ? other + 1 : other;
        }
    }
    for (std::size_t b = 0; b < donors.size(); ++b) {
        r.tags.push_back(cfg.classes[donors[b]].biases[b]);
    }
    r.truth_alignment =
        donors[0] == ci ? TruthAlignment::aligned : TruthAlignment::conflict;
    if (donors[0] != ci) {
        st.realized_conflicts[split_name][cls.name] += 1;
    }

    for (const std::string& word : st.noise_vocab) {
        if (rng.bernoulli(cfg.noise_tag_prob)) r.tags.push_back(word);
    }

    if (cfg.has_features()) {
        std::vector<double> f;
        f.reserve(cfg.dim_target + cfg.dim_bias * donors.size() + cfg.dim_noise);
        const double target_value = cfg.mu_target * class_signature(ci, n_classes);
        for (std::size_t d = 0; d < cfg.dim_target; ++d) {
            f.push_back(rng.normal(target_value, cfg.noise_sigma));
        }
        for (std::size_t b = 0; b < donors.size(); ++b) {
            const double bias_value = cfg.mu_bias * class_signature(donors[b], n_classes);
            for (std::size_t d = 0; d < cfg.dim_bias; ++d) {
                f.push_back(rng.normal(bias_value, cfg.noise_sigma));
            }
        }
        for (std::size_t d = 0; d < cfg.dim_noise; ++d) {
            f.push_back(rng.normal(0.0, cfg.noise_sigma));
        }
        r.features = std::move(f);
    }
    return r;
}

} // namespace

SynthOutput generate(const SynthConfig& cfg) {
    cfg.validate();
    GenState st{cfg, {}, {}};
    for (int w = 0; w < cfg.noise_vocab_size; ++w) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "n%02d", w);
        st.noise_vocab.emplace_back(buf);
    }

    const std::size_t n_classes = cfg.classes.size();
    const int val_per_class =
        std::max(1, static_cast<int>(std::lround(0.2 * cfg.samples_per_class)));
    const int test_per_class = cfg.samples_per_class;

    std::vector<SampleRecord> train_records;
    std::vector<SampleRecord> val_records;
    std::vector<SampleRecord> test_records;
    std::uint64_t stream = 0;

    for (std::size_t ci = 0; ci < n_classes; ++ci) {
        for (int i = 0; i < cfg.samples_per_class; ++i) {
            train_records.push_back(make_record(st, kTrain, "train", ci, i, -1, stream++));
        }
    }
    // Rare-attr injections tag the first `count` train records of the class.
    for (const RareAttrSpec& ra : cfg.rare_attrs) {
        int injected = 0;
        for (SampleRecord& r : train_records) {
            if (injected >= ra.count) break;
            if (r.class_label == ra.class_name) {
                r.tags.push_back(ra.attribute);
                ++injected;
            }
        }
    }
    stream = 0;
    for (std::size_t ci = 0; ci < n_classes; ++ci) {
        for (int i = 0; i < val_per_class; ++i) {
            val_records.push_back(make_record(st, kVal, "val", ci, i, -1, stream++));
        }
    }
    stream = 0;
    for (std::size_t ci = 0; ci < n_classes; ++ci) {
        const int n_aligned = (test_per_class + 1) / 2;
        for (int i = 0; i < test_per_class; ++i) {
            const int override_flag = i < n_aligned ? 1 : 0;
            test_records.push_back(make_record(st, kTest, "test", ci, i, override_flag, stream++));
        }
    }

    SynthOutput out;
    if (cfg.rho > 0.0 && st.realized_conflicts["train"].empty()) {
        out.warnings.push_back("rho > 0 but no conflict samples were realized in train; "
                               "increase samples_per_class or rho");
    }

    const auto seed64 = static_cast<std::int64_t>(cfg.seed);
    out.train = make_corpus(std::move(train_records), seed64);
    out.val = make_corpus(std::move(val_records), seed64);
    out.test = make_corpus(std::move(test_records), seed64);

    ordered_json truth;
    truth["seed"] = cfg.seed;
    truth["rho"] = cfg.rho;
    ordered_json classes = ordered_json::array();
    for (std::size_t ci = 0; ci < n_classes; ++ci) {
        const SynthClassSpec& cls = cfg.classes[ci];
        ordered_json c;
        c["name"] = cls.name;
        c["target_keyword"] = cls.target_keyword;
        c["biases"] = std::vector<std::string>(cls.biases.begin(),
                                               cls.biases.begin() + cfg.bias_blocks);
        c["target_value"] = cfg.mu_target * class_signature(ci, n_classes);
        c["bias_value"] = cfg.mu_bias * class_signature(ci, n_classes);
        classes.push_back(std::move(c));
    }
    truth["classes"] = std::move(classes);
    truth["feature_dims"] = {{"target", cfg.dim_target},
                             {"bias", cfg.dim_bias},
                             {"noise", cfg.dim_noise},
                             {"bias_blocks", cfg.bias_blocks}};
    truth["margins"] = {{"mu_target", cfg.mu_target}, {"mu_bias", cfg.mu_bias}};
    truth["noise_sigma"] = cfg.noise_sigma;
    truth["counts"] = {{"train_per_class", cfg.samples_per_class},
                       {"val_per_class", val_per_class},
                       {"test_per_class", test_per_class}};
    ordered_json realized = ordered_json::object();
    for (const char* split_name : {"train", "val", "test"}) {
        ordered_json per_class = ordered_json::object();
        for (const SynthClassSpec& cls : cfg.classes) {
            per_class[cls.name] = st.realized_conflicts[split_name][cls.name];
        }
        realized[split_name] = std::move(per_class);
    }
    truth["realized_conflicts"] = std::move(realized);
    out.truth_json = truth.dump(2) + "\n";
    return out;
}

} // namespace debias
