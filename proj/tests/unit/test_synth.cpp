#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "srr/errors.hpp"
#include "srr/synth.hpp"

using namespace srr;

TEST_CASE("generate_household is deterministic") {
    SynthProfile p;
    p.morning_peak.magnitude_kw = 1.5;
    p.evening_peak.magnitude_kw = 2.0;
    p.spike_rate_per_day = 4.0;
    p.solar_capacity_kw = 3.0;
    p.noise_std_kw = 0.1;
    p.peak_jitter_hours = 0.5;
    p.seed = 99;
    const auto a = generate_household(p, 5);
    const auto b = generate_household(p, 5);
    CHECK(a.values == b.values);
    CHECK(a.size() == 5 * kSamplesPerDay);
    CHECK(a.interval_seconds == 900);
    p.seed = 100;
    CHECK(generate_household(p, 5).values != a.values);
}

TEST_CASE("base-only profile gives constant quarter-hour energy") {
    SynthProfile p;
    p.base_load_kw = 1.0;
    const auto s = generate_household(p, 2);
    for (double v : s.values) CHECK(v == 0.25);
}

TEST_CASE("no solar, spikes or noise keeps values non-negative") {
    SynthProfile p;
    p.diurnal_swing = 0.3;
    p.morning_peak.magnitude_kw = 1.0;
    p.evening_peak.magnitude_kw = 2.5;
    p.peak_jitter_hours = 1.0;
    p.seed = 5;
    const auto s = generate_household(p, 7);
    CHECK(*std::min_element(s.values.begin(), s.values.end()) >= 0.0);
}

TEST_CASE("solar can drive net export") {
    SynthProfile p;
    p.base_load_kw = 0.3;
    p.solar_capacity_kw = 4.0;
    const auto s = generate_household(p, 1);
    CHECK(*std::min_element(s.values.begin(), s.values.end()) < 0.0);
}

TEST_CASE("daily energy matches the closed form") {
    SynthProfile p;
    p.base_load_kw = 0.6;
    p.diurnal_swing = 0.2;
    p.morning_peak = {7.0, 0.8, 1.2};
    p.evening_peak = {19.5, 1.2, 2.5};
    p.solar_capacity_kw = 3.0;
    const auto s = generate_household(p, 3);
    for (int d = 0; d < 3; ++d) {
        const double day = std::accumulate(s.values.begin() + d * kSamplesPerDay,
                                           s.values.begin() + (d + 1) * kSamplesPerDay, 0.0);
        // Midpoint sampling of smooth shapes; the residual is discretization only.
        CHECK(day == doctest::Approx(analytic_daily_energy(p)).epsilon(2e-3));
    }
}

TEST_CASE("invalid profiles are rejected") {
    SynthProfile p;
    p.base_load_kw = -1.0;
    CHECK_THROWS_AS(validate(p), ValidationError);
    p = SynthProfile{};
    p.morning_peak.width_hours = 0.0;
    CHECK_THROWS_AS(generate_household(p, 1), ValidationError);
    p = SynthProfile{};
    p.noise_std_kw = std::nan("");
    CHECK_THROWS_AS(validate(p), ValidationError);
}

TEST_CASE("corpus shape and region assignment") {
    CorpusOptions o;
    o.n_households = 3;
    o.days = 2;
    const auto c = make_synthetic_corpus(o);
    REQUIRE(c.size() == 3);
    std::set<std::string> labels;
    for (const auto& h : c) labels.insert(h.region);
    CHECK(labels.size() == 3);
    CHECK(c[0].series.household_id == "hh000");

    const auto again = make_synthetic_corpus(o);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i].series.values == again[i].series.values);
}

TEST_CASE("default corpus mirrors the three-state layout") {
    CorpusOptions o;
    o.days = 1;
    const auto c = make_synthetic_corpus(o);
    CHECK(c.size() == 73);
    std::map<std::string, int> per_region;
    for (const auto& h : c) ++per_region[h.region];
    CHECK(per_region == std::map<std::string, int>{{"CA", 25}, {"NY", 24}, {"TX", 24}});
}

TEST_CASE("naive wpe oracle degenerate windows") {
    const std::vector<double> a{1, 4, 2, 8};
    const std::vector<double> b{2, 2, 2, 2};
    CHECK(naive_wpe_oracle(a, b, MetricConfig{1, 1, 1}) == 9.0 / 4.0);
    CHECK(naive_wpe_oracle(a, b, MetricConfig{1, 4, 1}) == 6.0);
    CHECK(naive_wpe_oracle(std::vector<double>{0, 0, 5, 0, 1, 1, 1, 1}, std::vector<double>{5, 0, 0, 0, 1, 1, 1, 1},
                           MetricConfig{1, 4, 1}) == 1.6);
}
