#pragma once

// Synthetic household load generator. Stands in for licensed meter data so
// the whole pipeline can be exercised end to end; also hosts the brute-force
// windowed-peak-error oracle.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srr/metrics.hpp"
#include "srr/random.hpp"
#include "srr/series.hpp"

namespace srr {

struct PeakShape {
    double center_hour = 12.0;
    double width_hours = 1.0;  // Gaussian standard deviation
    double magnitude_kw = 0.0;
};

struct SynthProfile {
    double base_load_kw = 0.5;
    /// Fractional cosine swing of the base load, highest at 15:00.
    double diurnal_swing = 0.0;
    PeakShape morning_peak{7.5, 1.0, 0.0};
    PeakShape evening_peak{19.0, 1.0, 0.0};
    /// Each day both peak centres shift by an independent uniform draw in
    /// [-jitter, +jitter] hours.
    double peak_jitter_hours = 0.0;
    double spike_rate_per_day = 0.0;
    double spike_magnitude_kw = 3.0;
    double solar_capacity_kw = 0.0;
    double noise_std_kw = 0.0;
    std::uint64_t seed = 0;
};

void validate(const SynthProfile& profile);

constexpr int kSamplesPerDay = 96;
constexpr int kQuarterHourSeconds = 900;

/// Default corpus start, 2019-06-01T00:00:00Z.
Timestamp default_corpus_start();

/// 96 * days quarter-hour kWh values. Pure function of (profile, days).
IntervalSeries generate_household(const SynthProfile& profile, int days, std::string household_id = "synthetic",
                                  Timestamp start = default_corpus_start());

/// Daily kWh of the noise- and spike-free profile by closed-form integration.
double analytic_daily_energy(const SynthProfile& profile);

struct SyntheticHousehold {
    IntervalSeries series;
    std::string region;
    SynthProfile profile;
};

struct CorpusOptions {
    int n_households = 73;
    int days = 28;
    std::vector<std::string> regions{"CA", "NY", "TX"};
    std::uint64_t seed = 2020;
    Timestamp start = default_corpus_start();
};

/// Household i goes to region i mod R. Regions draw from different profile
/// families: the first is solar-heavy, the second has no solar and a strong
/// morning peak, the third has large evening peaks and some solar. Further
/// labels reuse these families cyclically.
std::vector<SyntheticHousehold> make_synthetic_corpus(const CorpusOptions& options);

SynthProfile draw_profile(std::size_t region_index, Rng& rng);

/// Explicit double loop over windows and samples; same contract as wpe().
double naive_wpe_oracle(std::span<const double> reference, std::span<const double> reconstruction,
                        const MetricConfig& config);

}  // namespace srr
