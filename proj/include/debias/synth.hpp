#pragma once

#include "debias/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace debias {

struct SynthClassSpec {
    std::string name;
    std::string target_keyword;
    std::vector<std::string> biases;  // planted bias keywords, rank order
};

struct RareAttrSpec {
    std::string class_name;
    std::string attribute;
    int count = 0;
};

/// Configuration for a controllable synthetic biased corpus. Feature
/// channels are optional (all dims zero = tag-only corpus); the bias
/// margin must exceed the target margin so the bias channel is the
/// easier cue.
struct SynthConfig {
    std::vector<SynthClassSpec> classes;
    int samples_per_class = 100;
    double rho = 0.0;               // bias-conflict ratio in train/val
    int noise_vocab_size = 0;
    double noise_tag_prob = 0.0;
    std::vector<RareAttrSpec> rare_attrs;
    std::size_t dim_target = 0;
    std::size_t dim_bias = 0;       // per bias block
    std::size_t dim_noise = 0;
    double mu_target = 1.0;
    double mu_bias = 2.0;
    double noise_sigma = 0.5;
    std::uint64_t seed = 0;
    int bias_blocks = 1;            // number of independently planted biases per class

    static SynthConfig from_file(const std::filesystem::path& path);
    void validate() const;
    bool has_features() const { return dim_target + dim_bias + dim_noise > 0; }
};

struct SynthOutput {
    Corpus train;
    Corpus val;   // same distribution as train, ~20% of its mass
    Corpus test;  // balanced: half aligned, half conflict per class
    std::string truth_json;  // planted biases, channel values, realized counts
    std::vector<std::string> warnings;
};

SynthOutput generate(const SynthConfig& config);

/// Returns `base` reconfigured to plant k independent biases per class;
/// every class must already carry at least k bias keywords.
SynthConfig multi_bias_config(const SynthConfig& base, int k);

} // namespace debias
