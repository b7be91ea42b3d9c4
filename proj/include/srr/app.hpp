#pragma once

// Command-line pipeline: synthesize or ingest data, train, evaluate and
// reconstruct. Each command writes its outputs, the resolved config and a
// manifest into one output directory.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "srr/ingest.hpp"
#include "srr/metrics.hpp"
#include "srr/model.hpp"
#include "srr/training.hpp"

namespace srr::app {

namespace fs = std::filesystem;

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kUsageError = 1, kDataError = 2, kNumericError = 3 };

struct SynthSettings {
    int n_households = 73;
    int days = 28;
    std::vector<std::string> regions{"CA", "NY", "TX"};
    std::string start = "2019-06-01T00:00:00Z";
};

struct SplitSettings {
    std::map<std::string, int> train_counts{{"CA", 15}, {"NY", 18}, {"TX", 0}};
    GapPolicy gap_policy = GapPolicy::drop_day;
    double validation_fraction = 0.1;
};

struct MetricSettings {
    std::vector<int> window_hours{1, 3, 6};
    int primary_window_hours = 3;
    int stride_samples = 1;
};

struct RunConfig {
    std::uint64_t seed = 2020;
    int factor = 4;
    SynthSettings synth;
    CsvSchema csv;
    SplitSettings split;
    /// factor and window_length are derived from the other sections.
    GeneratorConfig generator;
    /// input_length is derived.
    DiscriminatorConfig discriminator;
    TrainConfig train;
    MetricSettings metrics;

    int low_interval_seconds() const { return csv.expected_interval_seconds * factor; }
    int samples_per_hour() const { return 3600 / csv.expected_interval_seconds; }
    std::vector<MetricConfig> metric_configs() const;
};

/// Overlays `doc` on the defaults. Unknown keys and wrong types raise
/// ConfigError; the result is validated and its derived fields filled in.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const fs::path& path);
nlohmann::ordered_json to_json(const RunConfig& config);
void resolve(RunConfig& config);

/// Household id -> region label, read from households.json when present.
std::map<std::string, std::string> load_regions(const fs::path& data_dir, const std::vector<MeterSeries>& series);

/// Test-split pairs ready for scoring.
struct EvaluationData {
    DatasetSplit split;
    std::vector<SrPair> pairs;
    std::vector<std::string> groups;
    /// Test segments shorter than `min_low_length`, left out for every method.
    std::size_t excluded_segments = 0;
    std::string data_digest;
};

EvaluationData prepare_evaluation_data(const RunConfig& config, const fs::path& data_dir,
                                       const std::optional<DatasetSplit>& split, std::size_t min_low_length);

void cmd_synth(const RunConfig& config, const fs::path& out_dir);
void cmd_train(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir);

struct EvaluateOptions {
    std::vector<fs::path> checkpoints;
    std::optional<fs::path> split;
    bool per_series_csv = false;
};

/// Returns the report that was written to out_dir/report.json.
EvalReport cmd_evaluate(const RunConfig& config, const fs::path& data_dir, const EvaluateOptions& options,
                        const fs::path& out_dir);

struct ReconstructOptions {
    fs::path checkpoint;
    fs::path input;
    std::optional<fs::path> truth;
};

void cmd_reconstruct(const RunConfig& config, const ReconstructOptions& options, const fs::path& out_dir);

/// Applies SRR_LOG_LEVEL (trace, debug, info, warn, error, off) and routes
/// logs to stderr.
void configure_logging(const std::string& fallback_level = "info");

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

/// FNV-1a digest of a file's bytes.
std::string file_digest(const fs::path& path);

}  // namespace srr::app
