#include <doctest.h>

#include "oracles/oracles.hpp"
#include "helpers.hpp"
#include "srr/errors.hpp"
#include "srr/metrics.hpp"
#include "srr/random.hpp"
#include "srr/synth.hpp"

using namespace srr;
using testing::series;

namespace {

MetricConfig samples(int width) { return MetricConfig{width, 1, 1}; }

}  // namespace

TEST_CASE("mse hand examples") {
    CHECK(mse(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 1.0);
    CHECK(mse(std::vector<double>{0, 0, 5, 0}, std::vector<double>{0, 5, 0, 0}) == 12.5);
    const std::vector<double> x{0.3, -1.0, 2.5};
    CHECK(mse(x, x) == 0.0);
    CHECK_THROWS_AS(mse(std::vector<double>{1}, std::vector<double>{1, 2}), StructuralError);
}

TEST_CASE("wpe hand examples") {
    CHECK(wpe(std::vector<double>{0, 5, 0, 0}, std::vector<double>{0, 0, 5, 0}, samples(4)) == 0.0);
    CHECK(wpe(std::vector<double>{0, 0, 5, 0, 1, 1, 1, 1}, std::vector<double>{5, 0, 0, 0, 1, 1, 1, 1}, samples(4)) ==
          1.6);
    const std::vector<double> x{1, 4, 2, 8, 5, 7};
    CHECK(wpe(x, x, samples(3)) == 0.0);
}

TEST_CASE("wpe degenerate windows") {
    const std::vector<double> a{1, 4, 2, 8};
    const std::vector<double> b{2, 2, 2, 2};
    CHECK(wpe(a, b, samples(1)) == doctest::Approx((1 + 2 + 0 + 6) / 4.0));
    CHECK(wpe(a, b, samples(4)) == 6.0);
    CHECK_THROWS_AS(wpe(a, b, samples(5)), InsufficientLengthError);
}

TEST_CASE("window maxima counts follow the stride") {
    const std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6};
    CHECK(sliding_max(v, 3, 1) == std::vector<double>{4, 4, 5, 9, 9, 9});
    CHECK(sliding_max(v, 3, 2) == std::vector<double>{4, 5, 9});
    CHECK(sliding_max(v, 8, 1) == std::vector<double>{9});
}

TEST_CASE("fast wpe agrees with both oracles") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 8 + rng.below(200);
        const int width = 1 + static_cast<int>(rng.below(8));
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse values make ties common.
            a[i] = static_cast<double>(rng.below(5)) - 1.0;
            b[i] = rng.uniform(-1.0, 3.0);
        }
        const auto fast = window_peak_errors(a, b, samples(width));
        CHECK(fast == oracle::window_errors(a, b, width, 1));
        CHECK(wpe(a, b, samples(width)) == oracle::wpe(a, b, width));
        CHECK(wpe(a, b, samples(width)) == naive_wpe_oracle(a, b, samples(width)));
    }
}

TEST_CASE("metric config validation") {
    CHECK_THROWS_AS(validate(MetricConfig{0, 4, 1}), ValidationError);
    CHECK_THROWS_AS(validate(MetricConfig{3, 4, 0}), ValidationError);
    CHECK(MetricConfig{3, 4, 1}.window_samples() == 12);
}

TEST_CASE("evaluate pools per sample and per window") {
    const auto p1 = make_pair(series({0, 0, 5, 0, 1, 1, 1, 1}), 4);
    const auto p2 = make_pair(series({2, 2, 2, 2}), 4);
    const auto p3 = make_pair(series({1, 0, 0, 3}), 4);
    const auto r1 = series({5, 0, 0, 0, 1, 1, 1, 1});
    const auto r2 = series({2, 2, 2, 2});
    const auto r3 = series({1, 1, 1, 2});  // sums to 5, truth sums to 4
    const std::vector<EvalCase> cases{{&p1, &r1, "B"}, {&p2, &r2, "A"}, {&p3, &r3, "B"}};
    const std::vector<MetricConfig> configs{MetricConfig{1, 4, 1}};
    const auto report = evaluate(cases, "m", configs);

    REQUIRE(report.groups.size() == 2);
    CHECK(report.groups[0].group == "A");
    CHECK(report.groups[1].group == "B");
    const auto* b = report.group("B")->method("m");
    CHECK(b->n_samples == 12);
    CHECK(b->n_series == 2);
    CHECK(b->mse == oracle::mse({0, 0, 5, 0, 1, 1, 1, 1, 1, 0, 0, 3}, {5, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 2}));
    CHECK(b->wpe_at(1)->n_windows == 6);
    CHECK(b->wpe_at(1)->mean_wpe == (0 + 4 + 4 + 0 + 0 + 1) / 6.0);
    CHECK(b->constraint_violations == 1);
    const auto* pooled = report.pooled.method("m");
    CHECK(pooled->n_series == 3);
    CHECK(pooled->wpe_at(1)->n_windows == 7);
    CHECK(pooled->constraint_violations == 1);
    CHECK(report.group("A")->method("m")->mse == 0.0);

    const auto doc = to_json(report);
    CHECK(doc["pooled"]["methods"][0]["wpe"][0]["n_windows"] == 7);
    CHECK(format_table(report, 1).find("pooled") != std::string::npos);
}

TEST_CASE("evaluate identical reconstruction is perfect") {
    const auto p = make_pair(series({1, 2, 3, 4, 5, 6, 7, 8}), 4);
    const std::vector<EvalCase> cases{{&p, &p.high, "X"}};
    const std::vector<MetricConfig> configs{MetricConfig{1, 4, 1}, MetricConfig{2, 4, 1}};
    const auto report = evaluate(cases, "same", configs);
    for (const auto* g : {report.group("X"), report.group("pooled")}) {
        CHECK(g->method("same")->mse == 0.0);
        CHECK(g->method("same")->wpe_at(1)->mean_wpe == 0.0);
        CHECK(g->method("same")->wpe_at(2)->mean_wpe == 0.0);
    }
}

TEST_CASE("evaluate errors") {
    const std::vector<MetricConfig> configs{MetricConfig{1, 4, 1}};
    CHECK_THROWS_AS(evaluate({}, "m", configs), EmptyDataError);
    const auto p = make_pair(series({1, 2, 3, 4}), 4);
    const auto short_rec = series({1, 2});
    const std::vector<EvalCase> bad{{&p, &short_rec, "X"}};
    CHECK_THROWS_AS(evaluate(bad, "m", configs), StructuralError);
}

TEST_CASE("merge appends methods") {
    const auto p = make_pair(series({1, 2, 3, 4}), 4);
    const auto base = series({2.5, 2.5, 2.5, 2.5});
    const std::vector<EvalCase> c1{{&p, &base, "X"}};
    const std::vector<EvalCase> c2{{&p, &p.high, "X"}};
    const std::vector<MetricConfig> configs{MetricConfig{1, 4, 1}};
    auto report = evaluate(c1, "baseline", configs);
    merge(report, evaluate(c2, "exact", configs));
    CHECK(report.group("X")->methods.size() == 2);
    CHECK(report.pooled.method("exact")->mse == 0.0);
    CHECK(report.pooled.method("baseline")->mse == 1.25);
}
