#include "debias/synth.hpp"

#include "debias/errors.hpp"
#include "debias/stab.hpp"
#include "debias/stats.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace debias;
using namespace testsupport;

namespace {

std::int64_t conflicts_in(const Corpus& corpus) {
    std::int64_t n = 0;
    for (const SampleRecord& r : corpus.records) {
        if (r.truth_alignment == TruthAlignment::conflict) ++n;
    }
    return n;
}

} // namespace

TEST_CASE("rho=0 plants zero conflicts in train and val; test stays balanced") {
    SynthOutput out = generate(small_synth_config(1, 0.0, 50));
    CHECK(conflicts_in(out.train) == 0);
    CHECK(conflicts_in(out.val) == 0);
    CHECK(conflicts_in(out.test) == static_cast<std::int64_t>(out.test.size()) / 2);
    CHECK(out.train.size() == 100);
    CHECK(out.val.size() == 20);  // 20% of the train mass
    CHECK(out.test.size() == 100);
}

TEST_CASE("generation is seed deterministic byte for byte") {
    TempDir dir("synth_det");
    for (int round = 0; round < 2; ++round) {
        SynthOutput out = generate(small_synth_config(9, 0.05, 200));
        write_corpus(out.train, dir.file("train" + std::to_string(round) + ".jsonl"));
        std::ofstream truth(dir.file("truth" + std::to_string(round) + ".json"));
        truth << out.truth_json;
    }
    auto slurp = [&](const std::string& name) {
        std::ifstream in(dir.file(name), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    CHECK(slurp("train0.jsonl") == slurp("train1.jsonl"));
    CHECK(slurp("truth0.json") == slurp("truth1.json"));
}

TEST_CASE("different seeds give different corpora") {
    SynthOutput a = generate(small_synth_config(1, 0.05, 100));
    SynthOutput b = generate(small_synth_config(2, 0.05, 100));
    CHECK(a.train != b.train);
}

TEST_CASE("rare attribute injection tags exactly the requested count") {
    SynthConfig cfg = small_synth_config(3, 0.0, 80);
    cfg.rare_attrs = {{"young", "snow", 1}};
    SynthOutput out = generate(cfg);
    std::int64_t snow = 0;
    for (const SampleRecord& r : out.train.records) {
        if (r.has_tag("snow")) {
            ++snow;
            CHECK(r.class_label == "young");
        }
    }
    CHECK(snow == 1);
    for (const SampleRecord& r : out.val.records) CHECK_FALSE(r.has_tag("snow"));
}

TEST_CASE("truth_alignment is consistent with the planted bias keyword") {
    SynthOutput out = generate(small_synth_config(4, 0.2, 150));
    for (const Corpus* corpus : {&out.train, &out.val, &out.test}) {
        for (const SampleRecord& r : corpus->records) {
            const std::string own = r.class_label == "young" ? "woman" : "man";
            REQUIRE(r.truth_alignment.has_value());
            CHECK((*r.truth_alignment == TruthAlignment::aligned) == r.has_tag(own));
        }
    }
}

TEST_CASE("empirical conflict fraction tracks rho within 3 sigma") {
    const double rho = 0.1;
    const int per_class = 400;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SynthOutput out = generate(small_synth_config(seed, rho, per_class));
        const double n = static_cast<double>(out.train.size());
        const double fraction = static_cast<double>(conflicts_in(out.train)) / n;
        const double sigma = std::sqrt(rho * (1 - rho) / n);
        CHECK(std::abs(fraction - rho) <= 3.0 * sigma);
    }
}

TEST_CASE("zero realized conflicts with positive rho warns instead of failing") {
    SynthConfig cfg = small_synth_config(5, 0.001, 2);
    SynthOutput out = generate(cfg);
    if (conflicts_in(out.train) == 0) {
        CHECK_FALSE(out.warnings.empty());
    }
}

TEST_CASE("multi-bias config plants every bias keyword at rho=0") {
    SynthConfig cfg = multi_bias_config(small_synth_config(6, 0.0, 60), 2);
    SynthOutput out = generate(cfg);
    for (const SampleRecord& r : out.train.records) {
        if (r.class_label == "young") {
            CHECK(r.has_tag("woman"));
            CHECK(r.has_tag("hat"));
        } else {
            CHECK(r.has_tag("man"));
            CHECK(r.has_tag("scarf"));
        }
    }
}

TEST_CASE("multi-bias blocks flip independently at rho=0.5") {
    // Joint-aligned fraction over both blocks should approach 0.25.
    double total = 0.0;
    double joint_aligned = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SynthConfig cfg = multi_bias_config(small_synth_config(seed, 0.5, 200), 2);
        SynthOutput out = generate(cfg);
        for (const SampleRecord& r : out.train.records) {
            const bool first =
                r.has_tag(r.class_label == "young" ? "woman" : "man");
            const bool second =
                r.has_tag(r.class_label == "young" ? "hat" : "scarf");
            total += 1.0;
            if (first && second) joint_aligned += 1.0;
        }
    }
    const double fraction = joint_aligned / total;
    CHECK(fraction == doctest::Approx(0.25).epsilon(0.15));
}

TEST_CASE("multi_bias_config validates capacity") {
    SynthConfig cfg = small_synth_config(7, 0.0, 10);
    CHECK_THROWS_AS(multi_bias_config(cfg, 3), ValidationError);  // only 2 keywords configured
    CHECK_THROWS_AS(multi_bias_config(cfg, 1), ValidationError);
}

TEST_CASE("config validation catches bad parameters") {
    SynthConfig cfg = small_synth_config(8, 0.0, 10);
    cfg.rho = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = small_synth_config(8, 0.0, 10);
    cfg.mu_bias = 0.5;  // must exceed mu_target
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = small_synth_config(8, 0.0, 10);
    cfg.classes.clear();
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("config files parse the documented keys") {
    TempDir dir("synth_cfg");
    std::ofstream out(dir.file("cfg.conf"));
    out << "classes = young:young:woman:hat, old:old:man:scarf\n"
        << "samples_per_class = 40\n"
        << "rho = 0.05\n"
        << "noise_vocab_size = 5\n"
        << "noise_tag_prob = 0.2\n"
        << "rare_attrs = young:snow:1\n"
        << "feature_dims = 2:2:3\n"
        << "mu_target = 1.0\n"
        << "mu_bias = 2.5\n"
        << "noise_sigma = 0.4\n"
        << "seed = 11\n";
    out.close();
    SynthConfig cfg = SynthConfig::from_file(dir.file("cfg.conf"));
    CHECK(cfg.classes.size() == 2);
    CHECK(cfg.classes[0].biases == std::vector<std::string>{"woman", "hat"});
    CHECK(cfg.samples_per_class == 40);
    CHECK(cfg.rho == 0.05);
    CHECK(cfg.rare_attrs.size() == 1);
    CHECK(cfg.dim_noise == 3);
    CHECK(cfg.mu_bias == 2.5);
    CHECK(cfg.seed == 11);
    SynthOutput generated = generate(cfg);
    CHECK(generated.train.size() == 80);
}

TEST_CASE("truth manifest lists planted biases and realized conflicts") {
    SynthConfig cfg = small_synth_config(12, 0.05, 100);
    SynthOutput out = generate(cfg);
    CHECK(out.truth_json.find("\"woman\"") != std::string::npos);
    CHECK(out.truth_json.find("realized_conflicts") != std::string::npos);
    CHECK(out.truth_json.find("\"noise_sigma\"") != std::string::npos);
}

TEST_CASE("detection recovers planted biases from generated corpora end to end") {
    SynthConfig cfg = small_synth_config(13, 0.01, 300);
    SynthOutput out = generate(cfg);
    ContingencyTable table = build_table(out.train);
    BiasReport report = detect(table, DetectMode::both, {{"", "young"}, {"", "old"}}, 3);
    CHECK(*report.chosen_bias("young") == "woman");
    CHECK(*report.chosen_bias("old") == "man");
}
