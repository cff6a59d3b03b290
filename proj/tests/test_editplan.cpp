#include "debias/editplan.hpp"

#include "debias/errors.hpp"
#include "debias/stab.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

using namespace debias;
using namespace testsupport;

namespace {

// Minimal report: each class maps to one detected bias (or none).
BiasReport report_with(const std::vector<std::pair<std::string, std::string>>& biases) {
    BiasReport report;
    report.mode = DetectMode::both;
    for (const auto& [cls, bias] : biases) {
        ClassDetection det;
        det.k = 3;
        if (!bias.empty()) {
            det.chosen.push_back(bias);
            det.ranked.push_back(BiasCandidate{bias, 1, 1.0, 0.5, true, 1.0});
        }
        report.per_class.emplace_back(cls, det);
    }
    return report;
}

Corpus two_class_corpus(int per_class) {
    std::vector<SampleRecord> records;
    for (int i = 0; i < per_class; ++i) {
        SampleRecord r;
        r.id = "c0-" + std::to_string(i);
        r.class_label = "c0";
        r.tags = {"woman", "hair"};
        records.push_back(std::move(r));
    }
    for (int i = 0; i < per_class; ++i) {
        SampleRecord r;
        r.id = "c1-" + std::to_string(i);
        r.class_label = "c1";
        r.tags = {"man", "suit"};
        records.push_back(std::move(r));
    }
    return make_corpus(std::move(records));
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("bias edits flip to the complementary class's bias with the exact template") {
    Corpus corpus = two_class_corpus(5);
    BiasReport report = report_with({{"c0", "woman"}, {"c1", "man"}});
    std::vector<EditInstruction> plan = plan_bias_edits(corpus, report);
    REQUIRE(plan.size() == 10);
    for (const EditInstruction& instr : plan) {
        CHECK(instr.kind == EditKind::bias_edit);
        if (instr.source_class == "c0") {
            CHECK(*instr.source_bias == "woman");
            CHECK(*instr.replacement_bias == "man");
            CHECK(instr.instruction_text ==
                  "Turn this c0 person's woman into man while keeping other attributes "
                  "unchanged.");
        } else {
            CHECK(*instr.replacement_bias == "woman");
        }
    }
}

TEST_CASE("classes without a detected bias get no bias edits") {
    Corpus corpus = two_class_corpus(4);
    BiasReport report = report_with({{"c0", "woman"}, {"c1", ""}});
    std::vector<EditInstruction> plan = plan_bias_edits(corpus, report);
    // c1 has no own bias (skip) and is also the only donor for c0, which
    // therefore cannot be planned either.
    CHECK(plan.empty());

    // With a third detectable class, c0 records are planned again.
    std::vector<SampleRecord> extra = corpus.records;
    SampleRecord r;
    r.id = "c2-0";
    r.class_label = "c2";
    r.tags = {"scarf"};
    extra.push_back(r);
    Corpus corpus3 = make_corpus(extra);
    BiasReport report3 = report_with({{"c0", "woman"}, {"c1", ""}, {"c2", "scarf"}});
    std::vector<EditInstruction> plan3 = plan_bias_edits(corpus3, report3);
    CHECK_FALSE(plan3.empty());
    for (const EditInstruction& instr : plan3) {
        CHECK(instr.source_class != "c1");
        if (instr.source_class == "c0") CHECK(*instr.replacement_bias == "scarf");
    }
}

TEST_CASE("missing class in the report is an error") {
    Corpus corpus = two_class_corpus(2);
    BiasReport report = report_with({{"c0", "woman"}});
    CHECK_THROWS_AS(plan_bias_edits(corpus, report), ValidationError);
}

TEST_CASE("two-class target edits always pick the other class") {
    Corpus corpus = two_class_corpus(5);
    BiasReport report = report_with({{"c0", "woman"}, {"c1", "man"}});
    std::vector<EditInstruction> plan = plan_target_edits(corpus, report, 42);
    REQUIRE(plan.size() == 10);
    for (const EditInstruction& instr : plan) {
        CHECK(instr.kind == EditKind::target_edit);
        CHECK(*instr.target_class == (instr.source_class == "c0" ? "c1" : "c0"));
        CHECK(*instr.target_class != instr.source_class);
    }
}

TEST_CASE("single-class corpora cannot be target-edited") {
    std::vector<SampleRecord> records;
    SampleRecord r;
    r.id = "x";
    r.class_label = "only";
    records.push_back(r);
    Corpus corpus = make_corpus(records);
    CHECK_THROWS_AS(plan_target_edits(corpus, report_with({{"only", "b"}}), 1), ValidationError);
}

TEST_CASE("four-class target sampling is near uniform and seed reproducible") {
    std::vector<SampleRecord> records;
    for (int i = 0; i < 10000; ++i) {
        SampleRecord r;
        r.id = "s" + std::to_string(i);
        r.class_label = "c0";
        records.push_back(std::move(r));
    }
    for (int c = 1; c < 4; ++c) {
        SampleRecord r;
        r.id = "pad" + std::to_string(c);
        r.class_label = "c" + std::to_string(c);
        records.push_back(std::move(r));
    }
    Corpus corpus = make_corpus(std::move(records));
    BiasReport report = report_with({{"c0", "b0"}, {"c1", "b1"}, {"c2", "b2"}, {"c3", "b3"}});

    std::vector<EditInstruction> plan = plan_target_edits(corpus, report, 7);
    std::map<std::string, int> counts;
    for (const EditInstruction& instr : plan) {
        if (instr.source_class == "c0") counts[*instr.target_class]++;
    }
    REQUIRE(counts.size() == 3);
    for (const auto& [cls, n] : counts) {
        CHECK(n > 3000);  // ~3333 each; binomial 3-sigma is ~140
        CHECK(n < 3700);
    }
    std::vector<EditInstruction> replay = plan_target_edits(corpus, report, 7);
    CHECK(replay == plan);  // exact counts reproducible for the seed
}

TEST_CASE("target-edit text mentions both the target class and the kept bias") {
    std::vector<SampleRecord> records;
    SampleRecord young;
    young.id = "y0";
    young.class_label = "young";
    young.tags = {"woman"};
    SampleRecord old;
    old.id = "o0";
    old.class_label = "old";
    old.tags = {"man"};
    records.push_back(young);
    records.push_back(old);
    Corpus corpus = make_corpus(records);
    BiasReport report = report_with({{"young", "woman"}, {"old", "man"}});
    std::vector<EditInstruction> plan = plan_target_edits(corpus, report, 0);
    const EditInstruction& instr = plan.front();
    CHECK(instr.source_class == "young");
    CHECK(*instr.target_class == "old");
    CHECK(instr.instruction_text.find("old") != std::string::npos);
    CHECK(instr.instruction_text.find("woman") != std::string::npos);
}

TEST_CASE("plan cardinality covers every original record") {
    Corpus corpus = two_class_corpus(17);
    BiasReport report = report_with({{"c0", "woman"}, {"c1", "man"}});
    CHECK(plan_bias_edits(corpus, report).size() == corpus.size());
    CHECK(plan_target_edits(corpus, report, 3).size() == corpus.size());
}

TEST_CASE("plan files round-trip and are deterministic") {
    TempDir dir("plan_rt");
    Corpus corpus = two_class_corpus(6);
    BiasReport report = report_with({{"c0", "woman"}, {"c1", "man"}});
    std::vector<EditInstruction> plan = plan_bias_edits(corpus, report, {}, 9);
    std::vector<EditInstruction> targets = plan_target_edits(corpus, report, 9);
    plan.insert(plan.end(), targets.begin(), targets.end());

    write_plan(plan, dir.file("p.jsonl"));
    CHECK(load_plan(dir.file("p.jsonl")) == plan);

    write_plan(plan, dir.file("p2.jsonl"));
    CHECK(slurp(dir.file("p.jsonl")) == slurp(dir.file("p2.jsonl")));

    write_plan({}, dir.file("empty.jsonl"));
    CHECK(slurp(dir.file("empty.jsonl")).empty());
    CHECK(load_plan(dir.file("empty.jsonl")).empty());
}

TEST_CASE("bad kind strings are rejected with the line number") {
    TempDir dir("plan_bad");
    std::ofstream out(dir.file("p.jsonl"));
    out << R"({"source_id":"x","kind":"resample","source_class":"c","instruction_text":""})"
        << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_plan(dir.file("p.jsonl")), doctest::Contains(":1:"),
                         ValidationError);
}

TEST_CASE("templates load from key=value files") {
    TempDir dir("plan_tpl");
    std::ofstream out(dir.file("templates.conf"));
    out << "bias_edit = \"swap {bias} for {replacement_bias} on {class}\"\n";
    out.close();
    EditTemplates tpl = EditTemplates::load(dir.file("templates.conf"));
    Corpus corpus = two_class_corpus(1);
    BiasReport report = report_with({{"c0", "woman"}, {"c1", "man"}});
    std::vector<EditInstruction> plan = plan_bias_edits(corpus, report, tpl);
    CHECK(plan.front().instruction_text == "swap woman for man on c0");
}
