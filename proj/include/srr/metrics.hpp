#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "srr/series.hpp"

namespace srr {

struct MetricConfig {
    int window_hours = 3;
    int samples_per_hour = 4;
    int stride_samples = 1;

    int window_samples() const { return window_hours * samples_per_hour; }
};

void validate(const MetricConfig& config);

/// Mean squared elementwise difference (kWh^2).
double mse(std::span<const double> reference, std::span<const double> reconstruction);

/// Maximum of each full window of `width` samples, windows `stride` apart.
/// Monotonic deque, O(n) for stride 1.
std::vector<double> sliding_max(std::span<const double> values, std::size_t width, std::size_t stride = 1);

/// |max(reference window) - max(reconstruction window)| for every full window.
std::vector<double> window_peak_errors(std::span<const double> reference, std::span<const double> reconstruction,
                                       const MetricConfig& config);

/// Windowed peak error: mean of window_peak_errors (kWh).
double wpe(std::span<const double> reference, std::span<const double> reconstruction, const MetricConfig& config);

struct EvalCase {
    const SrPair* pair = nullptr;
    const IntervalSeries* reconstruction = nullptr;
    std::string group;
};

struct WpeResult {
    int window_hours = 0;
    double mean_wpe = 0.0;
    std::size_t n_windows = 0;
};

struct MethodResult {
    std::string method;
    double mse = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_series = 0;
    std::vector<WpeResult> wpe;
    /// Reconstructions that break the energy constraint at 1e-6.
    std::size_t constraint_violations = 0;

    const WpeResult* wpe_at(int window_hours) const;
};

struct GroupResult {
    std::string group;
    std::vector<MethodResult> methods;

    const MethodResult* method(const std::string& name) const;
};

struct EvalReport {
    static constexpr int kVersion = 1;

    int samples_per_hour = 4;
    int stride_samples = 1;
    std::vector<int> window_hours;
    std::vector<GroupResult> groups;  // sorted by group label
    GroupResult pooled{"pooled", {}};
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

    const GroupResult* group(const std::string& name) const;
};

/// Scores one method. Errors are pooled per sample (MSE) and per window (WPE)
/// across every series of a group, in input order. One WpeResult per config.
EvalReport evaluate(std::span<const EvalCase> cases, const std::string& method, std::span<const MetricConfig> configs);

/// Appends the methods of `other` to `into`. Both must share metric settings
/// and group labels.
void merge(EvalReport& into, const EvalReport& other);

nlohmann::ordered_json to_json(const EvalReport& report);

/// Plain-text table: one row per method, MSE and mean WPE per group.
std::string format_table(const EvalReport& report, int window_hours);

}  // namespace srr
