#include "debias/stats.hpp"

#include "debias/errors.hpp"
#include "debias/rng.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <bit>
#include <cmath>

using namespace debias;
using namespace testsupport;

TEST_CASE("build_table counts the K10 fixture") {
    ContingencyTable t = build_table(k10());
    CHECK(t.total() == 10);
    CHECK(t.class_size("c0") == 5);
    CHECK(t.class_size("c1") == 5);
    CHECK(t.count("c0", "a") == 4);
    CHECK(t.count("c1", "a") == 1);
    CHECK(t.attr_total("a") == 5);
    CHECK(t.count("c0", "u") == 5);
    CHECK(t.count("c1", "u") == 5);
    CHECK(t.attr_total("u") == 10);
    CHECK(t.count("c0", "r") == 1);
    CHECK(t.count("c1", "r") == 0);
    CHECK(t.attr_total("r") == 1);
}

TEST_CASE("duplicate tags count once per record") {
    SampleRecord r;
    r.id = "x";
    r.class_label = "c";
    r.tags = {"Fuzzy", "fuzzy", "fuzzy"};
    Corpus corpus = make_corpus({r});
    ContingencyTable t = build_table(corpus);
    CHECK(t.count("c", "fuzzy") == 1);
    CHECK(t.attr_total("fuzzy") == 1);
}

TEST_CASE("records without tags leave the counts empty") {
    SampleRecord a;
    a.id = "a";
    a.class_label = "c";
    SampleRecord b;
    b.id = "b";
    b.class_label = "c";
    ContingencyTable t = build_table(make_corpus({a, b}));
    CHECK(t.attributes().empty());
    CHECK(t.total() == 2);
}

TEST_CASE("cond_prob and marginal on the fixture") {
    ContingencyTable t = build_table(k10());
    CHECK(cond_prob(t, "c0", "a") == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(cond_prob(t, "c0", "r") == 1.0);   // exclusive attribute
    CHECK(cond_prob(t, "c1", "r") == 0.0);   // absent from the class
    CHECK(marginal(t, "c0") == 0.5);
    CHECK_THROWS_AS(cond_prob(t, "c0", "nope"), ValidationError);
    CHECK_THROWS_AS(marginal(t, "c9"), ValidationError);
}

TEST_CASE("marginal for skewed and single-class corpora") {
    ContingencyTable skew = ContingencyTable::from_counts(
        {"c0", "c1"}, {1, 3}, {"a"}, {{1}, {2}});
    CHECK(marginal(skew, "c0") == 0.25);
    CHECK(marginal(skew, "c1") == 0.75);

    ContingencyTable single = ContingencyTable::from_counts({"only"}, {4}, {"a"}, {{2}});
    CHECK(marginal(single, "only") == 1.0);
}

TEST_CASE("is_dependent uses strict exact comparison") {
    ContingencyTable t = build_table(k10());
    CHECK(is_dependent(t, "c0", "a"));       // 4*10 > 5*5
    CHECK_FALSE(is_dependent(t, "c0", "u")); // 5*10 == 5*10, strict fails
    CHECK_FALSE(is_dependent(t, "c1", "u"));
    CHECK(is_dependent(t, "c0", "r"));       // 1*10 > 5*1: the rare-attribute pathology
}

TEST_CASE("is_dependent is exact where double ratios collapse") {
    // Consecutive Fibonacci convergents: F(77)/F(78) and F(76)/F(77)
    // differ by 1/(F(77)F(78)) ~ 2e-32, far below double resolution, so
    // both probabilities round to the same double. The exact integer
    // cross product still sees the strict inequality.
    const std::int64_t f76 = 3416454622906707LL;
    const std::int64_t f77 = 5527939700884757LL;
    const std::int64_t f78 = 8944394323791464LL;
    const std::int64_t n = f77;
    const std::int64_t m = f78;
    const std::int64_t n_c = 2 * f76;
    const std::int64_t total = 2 * f77;
    ContingencyTable t = ContingencyTable::from_counts(
        {"c0", "c1"}, {n_c, total - n_c}, {"a"}, {{n}, {m - n}});
    const double p_cond = cond_prob(t, "c0", "a");
    const double p_marg = marginal(t, "c0");
    CHECK(p_cond == p_marg);            // the doubles are indistinguishable...
    CHECK(is_dependent(t, "c0", "a"));  // ...the integers are not
}

TEST_CASE("joint cells on the fixture") {
    ContingencyTable t = build_table(k10());
    IndicatorJoint p = joint(t, "c0", "a");
    CHECK(p.p11 == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(p.p10 == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(p.p01 == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(p.p00 == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(p.p11 + p.p10 + p.p01 + p.p00 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("joint degenerate cells") {
    // Attribute on every sample: p10 = p00 = 0.
    ContingencyTable all = ContingencyTable::from_counts(
        {"c0", "c1"}, {5, 5}, {"u"}, {{5}, {5}});
    IndicatorJoint pu = joint(all, "c0", "u");
    CHECK(pu.p10 == 0.0);
    CHECK(pu.p00 == 0.0);

    // One tagged sample total, none of them in cp: p11 = 0.
    ContingencyTable one = ContingencyTable::from_counts(
        {"cp", "c"}, {5, 5}, {"x"}, {{0}, {1}});
    IndicatorJoint px = joint(one, "cp", "x");
    CHECK(px.p11 == 0.0);
    CHECK(px.p01 == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(px.p10 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(px.p00 == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("mutual information golden values on the fixture") {
    ContingencyTable t = build_table(k10());
    CHECK(mutual_information(t, "c0", "u") == 0.0);  // independent exactly

    const double mi_a = mutual_information(t, "c0", "a");
    const double mi_r = mutual_information(t, "c0", "r");
    CHECK(mi_a == doctest::Approx(kK10MiA).epsilon(1e-12));
    CHECK(mi_r == doctest::Approx(kK10MiR).epsilon(1e-12));
    CHECK(mi_a > mi_r);  // the MI condition defeats the rare attribute

    // Agreement with the independent oracle (the goldens above were
    // produced by it).
    CHECK(mi_a == doctest::Approx(mi_oracle_bits(4, 5, 5, 10)).epsilon(1e-12));
    CHECK(mi_r == doctest::Approx(mi_oracle_bits(1, 5, 1, 10)).epsilon(1e-12));
}

TEST_CASE("mutual information matches the oracle and the entropy form on random tables") {
    Rng rng(20240501);
    for (int iter = 0; iter < 300; ++iter) {
        const std::size_t n_classes = 2 + rng.below(3);
        ContingencyTable t = random_table(rng, n_classes, 4);
        for (std::size_t ci = 0; ci < t.classes().size(); ++ci) {
            for (std::size_t ai = 0; ai < t.attributes().size(); ++ai) {
                const double mi = mutual_information_at(t, ci, ai);
                const double oracle = mi_oracle_bits(t.count_at(ci, ai), t.class_size_at(ci),
                                                     t.attr_total_at(ai), t.total());
                const double entropy_form =
                    mi_entropy_form_bits(t.count_at(ci, ai), t.class_size_at(ci),
                                         t.attr_total_at(ai), t.total());
                CHECK(mi == doctest::Approx(oracle).epsilon(1e-10));
                CHECK(std::abs(mi - entropy_form) < 1e-12);
                CHECK(mi >= 0.0);
                const double hz = binary_entropy_bits(
                    static_cast<double>(t.class_size_at(ci)) / static_cast<double>(t.total()));
                const double hw = binary_entropy_bits(
                    static_cast<double>(t.attr_total_at(ai)) / static_cast<double>(t.total()));
                CHECK(mi <= std::min(hz, hw) + 1e-12);
            }
        }
    }
}

TEST_CASE("two-class MI is bit-identical for both classes") {
    Rng rng(77);
    for (int iter = 0; iter < 300; ++iter) {
        ContingencyTable t = random_table(rng, 2, 5);
        for (std::size_t ai = 0; ai < t.attributes().size(); ++ai) {
            const double mi0 = mutual_information_at(t, 0, ai);
            const double mi1 = mutual_information_at(t, 1, ai);
            CHECK(std::bit_cast<std::uint64_t>(mi0) == std::bit_cast<std::uint64_t>(mi1));
        }
    }
}

TEST_CASE("an attribute on every sample is independent of every class") {
    Rng rng(99);
    for (int iter = 0; iter < 50; ++iter) {
        RandomTableSpec spec = random_table_spec(rng, 2 + rng.below(2), 2);
        for (std::size_t c = 0; c < spec.classes.size(); ++c) {
            spec.counts[c][0] = spec.class_sizes[c];  // force a0 onto every sample
        }
        ContingencyTable t = ContingencyTable::from_counts(spec.classes, spec.class_sizes,
                                                           spec.attrs, spec.counts);
        const std::size_t a0 = t.attr_index("a0");
        for (std::size_t ci = 0; ci < t.classes().size(); ++ci) {
            CHECK_FALSE(is_dependent_at(t, ci, a0));
            CHECK(mutual_information_at(t, ci, a0) == 0.0);
        }
    }
}

TEST_CASE("parallel counting matches single-threaded counting") {
    SynthConfig cfg = small_synth_config(5, 0.05, 400);
    SynthOutput out = generate(cfg);
    ContingencyTable serial = build_table(out.train, 1);
    ContingencyTable parallel = build_table(out.train, 4);
    REQUIRE(serial.attributes() == parallel.attributes());
    REQUIRE(serial.classes() == parallel.classes());
    for (std::size_t ci = 0; ci < serial.classes().size(); ++ci) {
        for (std::size_t ai = 0; ai < serial.attributes().size(); ++ai) {
            CHECK(serial.count_at(ci, ai) == parallel.count_at(ci, ai));
        }
    }
}

TEST_CASE("from_counts rejects malformed tables") {
    CHECK_THROWS_AS(ContingencyTable::from_counts({"c"}, {2}, {"a"}, {{3}}),
                    ValidationError);  // n > N_c
    CHECK_THROWS_AS(ContingencyTable::from_counts({"c", "d"}, {2, 2}, {"a"}, {{0}, {0}}),
                    ValidationError);  // m(a) = 0
    CHECK_THROWS_AS(ContingencyTable::from_counts({"c", "c"}, {2, 2}, {"a"}, {{1}, {1}}),
                    ValidationError);  // duplicate class
}
