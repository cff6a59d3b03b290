#include "debias/corpus.hpp"

#include "debias/errors.hpp"
#include "debias/rng.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>

using namespace debias;
using namespace testsupport;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

} // namespace

TEST_CASE("load_corpus reads records, classes in first-appearance order") {
    TempDir dir("corpus_load");
    spit(dir.file("c.jsonl"),
         R"({"id":"s1","class":"dog","tags":["brown"],"provenance":"original"})"
         "\n"
         R"({"id":"s2","class":"cat","tags":["black"],"provenance":"original"})"
         "\n"
         R"({"id":"s3","class":"dog","tags":["leash","brown"],"provenance":"original"})"
         "\n");
    Corpus c = load_corpus(dir.file("c.jsonl"));
    CHECK(c.records.size() == 3);
    CHECK(c.class_set == std::vector<std::string>{"dog", "cat"});
    CHECK(c.records[0].id == "s1");
    CHECK(c.records[2].tags == std::vector<std::string>{"brown", "leash"});  // sorted
}

TEST_CASE("duplicate ids are rejected with the offending id") {
    TempDir dir("corpus_dup");
    spit(dir.file("c.jsonl"),
         R"({"id":"s1","class":"a","tags":[]})"
         "\n"
         R"({"id":"s1","class":"a","tags":[]})"
         "\n");
    CHECK_THROWS_WITH_AS(load_corpus(dir.file("c.jsonl")),
                         doctest::Contains("s1"), ValidationError);
}

TEST_CASE("parse errors carry the line number") {
    TempDir dir("corpus_parse");
    spit(dir.file("c.jsonl"),
         R"({"id":"s1","class":"a","tags":[]})"
         "\n"
         "{not json\n");
    CHECK_THROWS_WITH_AS(load_corpus(dir.file("c.jsonl")),
                         doctest::Contains(":2:"), ValidationError);
}

TEST_CASE("mixed feature dimensionality is rejected") {
    TempDir dir("corpus_dim");
    spit(dir.file("c.jsonl"),
         R"({"id":"s1","class":"a","tags":[],"features":[1.0,2.0]})"
         "\n"
         R"({"id":"s2","class":"a","tags":[],"features":[1.0]})"
         "\n");
    CHECK_THROWS_AS(load_corpus(dir.file("c.jsonl")), ValidationError);
}

TEST_CASE("empty corpus cannot be written or loaded") {
    TempDir dir("corpus_empty");
    CHECK_THROWS_AS(make_corpus({}), ValidationError);
    spit(dir.file("c.jsonl"), "");
    CHECK_THROWS_AS(load_corpus(dir.file("c.jsonl")), ValidationError);
}

TEST_CASE("single record corpus writes a single line") {
    TempDir dir("corpus_one");
    SampleRecord r;
    r.id = "only";
    r.class_label = "c";
    r.tags = {"t"};
    write_corpus(make_corpus({r}), dir.file("c.jsonl"));
    const std::string text = slurp(dir.file("c.jsonl"));
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
}

TEST_CASE("K10 round-trips byte-identically") {
    TempDir dir("corpus_rt");
    Corpus original = k10();
    write_corpus(original, dir.file("k10.jsonl"));
    const std::string first = slurp(dir.file("k10.jsonl"));

    Corpus reloaded = load_corpus(dir.file("k10.jsonl"));
    CHECK(reloaded == original);

    write_corpus(reloaded, dir.file("k10b.jsonl"));
    CHECK(slurp(dir.file("k10b.jsonl")) == first);
}

TEST_CASE("random corpora round-trip structurally") {
    Rng rng(4242);
    for (int iter = 0; iter < 20; ++iter) {
        std::vector<SampleRecord> records;
        const int n = 1 + static_cast<int>(rng.below(30));
        const bool with_features = rng.bernoulli(0.5);
        const bool with_meta = rng.bernoulli(0.5);
        for (int i = 0; i < n; ++i) {
            SampleRecord r;
            r.id = "r" + std::to_string(i);
            r.class_label = "c" + std::to_string(rng.below(3));
            const int n_tags = static_cast<int>(rng.below(5));
            for (int t = 0; t < n_tags; ++t) r.tags.push_back("t" + std::to_string(rng.below(8)));
            if (with_features) {
                r.features = std::vector<double>{rng.normal(0, 1), rng.uniform()};
            }
            if (with_meta && rng.bernoulli(0.3)) r.meta["note"] = "x" + std::to_string(i);
            if (rng.bernoulli(0.5)) {
                r.truth_alignment =
                    rng.bernoulli(0.5) ? TruthAlignment::aligned : TruthAlignment::conflict;
            }
            records.push_back(std::move(r));
        }
        Corpus corpus = make_corpus(std::move(records));
        TempDir dir("corpus_prop");
        write_corpus(corpus, dir.file("c.jsonl"));
        Corpus back = load_corpus(dir.file("c.jsonl"));
        CHECK(back == corpus);
        CHECK(corpus_summary(back).total == static_cast<std::int64_t>(corpus.records.size()));
    }
}

TEST_CASE("tags are case folded and deduplicated at load") {
    TempDir dir("corpus_fold");
    spit(dir.file("c.jsonl"),
         R"({"id":"s1","class":"a","tags":["Woman","woman","HAT"]})"
         "\n");
    Corpus c = load_corpus(dir.file("c.jsonl"));
    CHECK(c.records[0].tags == std::vector<std::string>{"hat", "woman"});
}

TEST_CASE("empty tags are rejected") {
    SampleRecord r;
    r.id = "s";
    r.class_label = "c";
    r.tags = {""};
    CHECK_THROWS_AS(make_corpus({r}), ValidationError);
}

TEST_CASE("unknown JSON keys are preserved in meta") {
    TempDir dir("corpus_meta");
    spit(dir.file("c.jsonl"),
         R"({"id":"s1","class":"a","tags":[],"vlm_version":"v2","score":3})"
         "\n");
    Corpus c = load_corpus(dir.file("c.jsonl"));
    CHECK(c.records[0].meta.at("vlm_version") == "v2");
    CHECK(c.records[0].meta.at("score") == "3");

    // The preserved keys survive a rewrite.
    write_corpus(c, dir.file("c2.jsonl"));
    Corpus back = load_corpus(dir.file("c2.jsonl"));
    CHECK(back.records[0].meta.at("vlm_version") == "v2");
}

TEST_CASE("corpus_summary on the fixture and degenerate corpora") {
    CorpusSummary s = corpus_summary(k10());
    CHECK(s.total == 10);
    REQUIRE(s.per_class.size() == 2);
    CHECK(s.per_class[0] == std::pair<std::string, std::int64_t>{"c0", 5});
    CHECK(s.per_class[1] == std::pair<std::string, std::int64_t>{"c1", 5});
    CHECK(s.vocabulary_size == 3);  // {a, r, u}
    CHECK_FALSE(s.feature_dim.has_value());

    // Single class, four records.
    std::vector<SampleRecord> records;
    for (int i = 0; i < 4; ++i) {
        SampleRecord r;
        r.id = "s" + std::to_string(i);
        r.class_label = "only";
        records.push_back(std::move(r));
    }
    CorpusSummary single = corpus_summary(make_corpus(records));
    CHECK(single.total == 4);
    CHECK(single.per_class[0].second == 4);

    // Disjoint per-class vocabularies of sizes 3 and 2 union to 5.
    std::vector<SampleRecord> disjoint;
    SampleRecord a;
    a.id = "a";
    a.class_label = "c0";
    a.tags = {"x1", "x2", "x3"};
    SampleRecord b;
    b.id = "b";
    b.class_label = "c1";
    b.tags = {"y1", "y2"};
    disjoint.push_back(a);
    disjoint.push_back(b);
    CHECK(corpus_summary(make_corpus(disjoint)).vocabulary_size == 5);
}
