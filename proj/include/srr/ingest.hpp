#pragma once

// CSV ingestion of meter data, gap handling, household splits and training
// windows.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "srr/series.hpp"

namespace srr {

enum class PowerUnit { kw_average, kwh_interval };

PowerUnit parse_power_unit(const std::string& text);
std::string to_string(PowerUnit unit);

struct CsvSchema {
    std::string timestamp_column = "timestamp";
    std::string household_column = "household_id";
    std::string power_column = "energy_kwh";
    PowerUnit power_unit = PowerUnit::kwh_interval;
    int expected_interval_seconds = 900;
};

void validate(const CsvSchema& schema);

/// A household's readings on a regular grid from its first to its last
/// timestamp. Missing rows and missing or non-finite readings are gaps; gap
/// slots hold NaN.
struct MeterSeries {
    std::string household_id;
    Timestamp start_time{};
    int interval_seconds = 900;
    std::vector<double> values;
    std::vector<bool> gap;

    std::size_t gap_count() const;
};

/// One MeterSeries per household, ordered by household id, values in kWh.
std::vector<MeterSeries> load_csv(const std::filesystem::path& path, const CsvSchema& schema);
std::vector<MeterSeries> parse_csv(std::istream& in, const CsvSchema& schema);

/// Writes kWh series in `schema` layout (converting back to kW when the
/// schema says so), rows grouped by household then time.
void write_csv(const std::filesystem::path& path, std::span<const IntervalSeries> series, const CsvSchema& schema);
void write_csv(std::ostream& out, std::span<const IntervalSeries> series, const CsvSchema& schema);

enum class GapPolicy { drop_day, fail };

GapPolicy parse_gap_policy(const std::string& text);

/// Gap-free, whole-UTC-day segments. drop_day discards every day that is
/// incomplete or contains a gap and splits the series there; fail throws
/// GapError at the first such slot.
std::vector<IntervalSeries> clean_gaps(const MeterSeries& series, GapPolicy policy);

/// Converts a series that must be gap-free (no day alignment required).
IntervalSeries require_complete(const MeterSeries& series);

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> test;
    std::map<std::string, std::string> regions;
    std::uint64_t seed = 0;

    bool is_train(const std::string& id) const;
};

/// Per-region train counts; households are shuffled per region with the seed
/// and the first `count` go to training, everything else to test.
DatasetSplit make_split(const std::map<std::string, std::string>& regions,
                        const std::map<std::string, int>& train_counts, std::uint64_t seed);

/// Throws EmptyDataError when the split has no training households.
void require_training_households(const DatasetSplit& split);

nlohmann::ordered_json to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const nlohmann::json& doc);

/// Full windows of `window_hours` low-resolution hours, `stride_hours` apart.
/// Series shorter than one window are skipped (and logged); zero windows in
/// total is an EmptyDataError.
std::vector<SrPair> window_dataset(std::span<const SrPair> pairs, int window_hours, int stride_hours);

struct HoldoutSplit {
    std::vector<IntervalSeries> train;
    std::vector<IntervalSeries> validation;
};

/// Moves the last ceil(fraction * days) days of a household's day-aligned
/// segments into validation.
HoldoutSplit holdout_tail_days(std::span<const IntervalSeries> segments, double fraction);

}  // namespace srr
