#include "srr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "srr/errors.hpp"

namespace srr {

namespace {

void validate_peak(const PeakShape& peak, const char* name) {
    if (!(peak.width_hours > 0.0) || !std::isfinite(peak.width_hours)) {
        throw ValidationError(std::string(name) + ".width_hours must be positive");
    }
    if (!std::isfinite(peak.magnitude_kw) || !std::isfinite(peak.center_hour)) {
        throw ValidationError(std::string(name) + " must have finite centre and magnitude");
    }
}

double wrap_hours(double d) { return d - 24.0 * std::round(d / 24.0); }

double bump(const PeakShape& peak, double hour, double shift) {
    if (peak.magnitude_kw == 0.0) return 0.0;
    const double z = wrap_hours(hour - peak.center_hour - shift) / peak.width_hours;
    return peak.magnitude_kw * std::exp(-0.5 * z * z);
}

double solar_shape(double hour) {
    const double s = std::sin(std::numbers::pi * (hour - 6.0) / 12.0);
    return hour > 6.0 && hour < 18.0 ? s : 0.0;
}

}  // namespace

void validate(const SynthProfile& p) {
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be finite and >= 0");
    };
    nonneg(p.base_load_kw, "base_load_kw");
    nonneg(p.diurnal_swing, "diurnal_swing");
    nonneg(p.peak_jitter_hours, "peak_jitter_hours");
    nonneg(p.spike_rate_per_day, "spike_rate_per_day");
    nonneg(p.solar_capacity_kw, "solar_capacity_kw");
    nonneg(p.noise_std_kw, "noise_std_kw");
    validate_peak(p.morning_peak, "morning_peak");
    validate_peak(p.evening_peak, "evening_peak");
    if (!(p.spike_magnitude_kw > 0.0) || !std::isfinite(p.spike_magnitude_kw)) {
        throw ValidationError("spike_magnitude_kw must be positive");
    }
}

Timestamp default_corpus_start() {
    using namespace std::chrono;
    return sys_days{year{2019} / June / 1};
}

IntervalSeries generate_household(const SynthProfile& profile, int days, std::string household_id, Timestamp start) {
    validate(profile);
    if (days < 1) throw ValidationError("days must be >= 1");

    const std::size_t n = static_cast<std::size_t>(days) * kSamplesPerDay;
    std::vector<double> kw(n, 0.0);

    Rng timing = Rng::stream(profile.seed, "peak-timing");
    for (int d = 0; d < days; ++d) {
        const double morning_shift = timing.uniform(-profile.peak_jitter_hours, profile.peak_jitter_hours);
        const double evening_shift = timing.uniform(-profile.peak_jitter_hours, profile.peak_jitter_hours);
        for (int i = 0; i < kSamplesPerDay; ++i) {
            const double hour = (i + 0.5) * 24.0 / kSamplesPerDay;
            double p = profile.base_load_kw *
                       (1.0 + profile.diurnal_swing * std::cos(2.0 * std::numbers::pi * (hour - 15.0) / 24.0));
            p += bump(profile.morning_peak, hour, morning_shift);
            p += bump(profile.evening_peak, hour, evening_shift);
            p -= profile.solar_capacity_kw * solar_shape(hour);
            kw[static_cast<std::size_t>(d) * kSamplesPerDay + i] = p;
        }
    }

    // Rectangular spikes, 1-3 samples wide; may spill into the next day.
    Rng spikes = Rng::stream(profile.seed, "spikes");
    for (int d = 0; d < days; ++d) {
        const int count = spikes.poisson(profile.spike_rate_per_day);
        for (int s = 0; s < count; ++s) {
            const std::size_t begin = static_cast<std::size_t>(d) * kSamplesPerDay + spikes.below(kSamplesPerDay);
            const std::size_t width = 1 + spikes.below(3);
            for (std::size_t t = begin; t < std::min(n, begin + width); ++t) kw[t] += profile.spike_magnitude_kw;
        }
    }

    if (profile.noise_std_kw > 0.0) {
        Rng noise = Rng::stream(profile.seed, "noise");
        for (auto& v : kw) v += noise.normal(0.0, profile.noise_std_kw);
    }

    IntervalSeries series{std::move(household_id), start, kQuarterHourSeconds, std::move(kw)};
    const double hours_per_sample = kQuarterHourSeconds / 3600.0;
    for (auto& v : series.values) v *= hours_per_sample;
    return series;
}

double analytic_daily_energy(const SynthProfile& p) {
    const double root_two_pi = std::sqrt(2.0 * std::numbers::pi);
    return p.base_load_kw * 24.0 + p.morning_peak.magnitude_kw * p.morning_peak.width_hours * root_two_pi +
           p.evening_peak.magnitude_kw * p.evening_peak.width_hours * root_two_pi -
           p.solar_capacity_kw * 24.0 / std::numbers::pi;
}

SynthProfile draw_profile(std::size_t region_index, Rng& rng) {
    SynthProfile p;
    p.base_load_kw = rng.uniform(0.3, 0.8);
    p.diurnal_swing = 0.15;
    p.peak_jitter_hours = 0.75;
    p.noise_std_kw = 0.05;
    p.morning_peak = {rng.uniform(6.5, 8.5), rng.uniform(0.4, 1.0), rng.uniform(0.5, 2.0)};
    p.evening_peak = {rng.uniform(17.5, 20.5), rng.uniform(0.5, 1.5), rng.uniform(1.0, 3.0)};
    p.spike_rate_per_day = rng.uniform(2.0, 6.0);
    p.spike_magnitude_kw = rng.uniform(2.0, 5.0);
    const double has_solar = rng.uniform();
    const double capacity = rng.uniform();
    switch (region_index % 3) {
        case 0:  // sunny, frequent rooftop solar
            p.solar_capacity_kw = has_solar < 0.7 ? 2.0 + 3.0 * capacity : 0.0;
            break;
        case 1:  // no solar, heavier mornings
            p.base_load_kw *= 1.2;
            p.morning_peak.magnitude_kw *= 1.5;
            break;
        default:  // hot, air-conditioning evenings
            p.evening_peak.magnitude_kw *= 1.5;
            p.evening_peak.width_hours *= 1.3;
            p.solar_capacity_kw = has_solar < 0.3 ? 1.0 + 3.0 * capacity : 0.0;
            break;
    }
    p.seed = rng.next_u64();
    return p;
}

std::vector<SyntheticHousehold> make_synthetic_corpus(const CorpusOptions& options) {
    if (options.n_households < 1) throw ValidationError("n_households must be >= 1");
    if (options.regions.empty()) throw ValidationError("at least one region label is required");
    if (options.days < 1) throw ValidationError("days must be >= 1");

    std::vector<SyntheticHousehold> corpus;
    corpus.reserve(options.n_households);
    for (int i = 0; i < options.n_households; ++i) {
        const std::size_t region = static_cast<std::size_t>(i) % options.regions.size();
        Rng rng = Rng::stream(options.seed, "household-profile", static_cast<std::uint64_t>(i));
        SynthProfile profile = draw_profile(region, rng);
        char id[16];
        std::snprintf(id, sizeof id, "hh%03d", i);
        corpus.push_back({generate_household(profile, options.days, id, options.start), options.regions[region],
                          profile});
    }
    return corpus;
}

double naive_wpe_oracle(std::span<const double> reference, std::span<const double> reconstruction,
                        const MetricConfig& config) {
    validate(config);
    if (reference.size() != reconstruction.size()) throw StructuralError("wpe oracle: lengths differ");
    const std::size_t width = config.window_samples();
    if (reference.size() < width) throw InsufficientLengthError("wpe oracle: series shorter than one window");
    double sum = 0.0;
    std::size_t windows = 0;
    for (std::size_t start = 0; start + width <= reference.size(); start += config.stride_samples) {
        double ref_max = reference[start];
        double rec_max = reconstruction[start];
        for (std::size_t i = start + 1; i < start + width; ++i) {
            if (reference[i] > ref_max) ref_max = reference[i];
            if (reconstruction[i] > rec_max) rec_max = reconstruction[i];
        }
        sum += std::abs(ref_max - rec_max);
        ++windows;
    }
    return sum / static_cast<double>(windows);
}

}  // namespace srr
