#include "srr/app.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "srr/errors.hpp"
#include "srr/random.hpp"
#include "srr/synth.hpp"

namespace srr::app {

namespace {

constexpr const char* kToolVersion = "0.1.0";

// Reads one JSON object, remembering which keys were consumed so that
// anything left over can be rejected.
class Section {
public:
    Section(const nlohmann::json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw ConfigError("config section '" + label() + "' must be an object");
    }

    template <typename T>
    void read(const char* key, T& target) {
        if (!doc_.contains(key)) return;
        seen_.insert(key);
        try {
            target = doc_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config key '" + qualified(key) + "' has the wrong type: " + e.what());
        }
    }

    void read(const char* key, std::optional<double>& target) {
        if (!doc_.contains(key)) return;
        if (doc_.at(key).is_null()) {
            seen_.insert(key);
            target.reset();
            return;
        }
        double value = 0.0;
        read(key, value);
        target = value;
    }

    template <typename Fn>
    void section(const char* key, Fn&& fn) {
        if (!doc_.contains(key)) return;
        seen_.insert(key);
        Section child(doc_.at(key), qualified(key));
        fn(child);
        child.finish();
    }

    void finish() const {
        for (const auto& item : doc_.items()) {
            if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + qualified(item.key()) + "'");
        }
    }

private:
    std::string label() const { return path_.empty() ? "<root>" : path_; }
    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const nlohmann::json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw ConfigError("writing '" + path.string() + "' failed");
}

void write_json(const fs::path& path, const nlohmann::ordered_json& doc) { write_text(path, doc.dump(2) + "\n"); }

void prepare_out_dir(const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) {
        throw ConfigError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
    }
}

// Manifest entries for deterministic files carry a digest; the rest are listed
// by name only.
void write_manifest(const fs::path& out_dir, const std::string& command, const RunConfig& config,
                    const std::vector<std::string>& files, const std::vector<std::string>& undigested,
                    nlohmann::ordered_json extra = nlohmann::ordered_json::object()) {
    nlohmann::ordered_json manifest;
    manifest["command"] = command;
    manifest["tool_version"] = kToolVersion;
    manifest["seed"] = config.seed;
    nlohmann::ordered_json entries = nlohmann::ordered_json::object();
    for (const auto& f : files) {
        entries[f] = {{"fnv1a64", file_digest(out_dir / f)}, {"bytes", fs::file_size(out_dir / f)}};
    }
    for (const auto& f : undigested) entries[f] = {{"fnv1a64", nullptr}, {"note", "contains wall-clock timings"}};
    manifest["files"] = entries;
    for (const auto& item : extra.items()) manifest[item.key()] = item.value();
    write_json(out_dir / "manifest.json", manifest);
}

nlohmann::ordered_json profile_json(const SynthProfile& p) {
    auto peak = [](const PeakShape& s) {
        return nlohmann::ordered_json{
            {"center_hour", s.center_hour}, {"width_hours", s.width_hours}, {"magnitude_kw", s.magnitude_kw}};
    };
    return {{"base_load_kw", p.base_load_kw},
            {"diurnal_swing", p.diurnal_swing},
            {"morning_peak", peak(p.morning_peak)},
            {"evening_peak", peak(p.evening_peak)},
            {"peak_jitter_hours", p.peak_jitter_hours},
            {"spike_rate_per_day", p.spike_rate_per_day},
            {"spike_magnitude_kw", p.spike_magnitude_kw},
            {"solar_capacity_kw", p.solar_capacity_kw},
            {"noise_std_kw", p.noise_std_kw},
            {"seed", p.seed}};
}

void require_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IngestError("data directory '" + dir.string() + "' does not exist");
}

fs::path corpus_path(const fs::path& data_dir) {
    const auto path = data_dir / "corpus.csv";
    if (!fs::exists(path)) throw IngestError("no corpus.csv in data directory '" + data_dir.string() + "'");
    return path;
}

std::string digest_pairs(std::span<const SrPair> pairs) {
    Fnv1a h;
    for (const auto& p : pairs) {
        h.update(p.high.household_id);
        h.update(format_timestamp(p.high.start_time));
        for (double v : p.high.values) h.update(v);
    }
    return h.hex();
}

}  // namespace

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot read '" + path.string() + "'");
    Fnv1a h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

// ---------------------------------------------------------------------------
// Configuration

std::vector<MetricConfig> RunConfig::metric_configs() const {
    std::vector<MetricConfig> out;
    for (int w : metrics.window_hours) out.push_back({w, samples_per_hour(), metrics.stride_samples});
    return out;
}

void resolve(RunConfig& c) {
    validate(c.csv);
    if (c.factor < 2) throw ConfigError("factor must be >= 2");
    if (3600 % c.csv.expected_interval_seconds != 0) {
        throw ConfigError("csv.expected_interval_seconds must divide one hour");
    }
    if (c.synth.n_households < 1 || c.synth.days < 1 || c.synth.regions.empty()) {
        throw ConfigError("synth needs n_households >= 1, days >= 1 and at least one region");
    }
    try {
        parse_timestamp(c.synth.start);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("synth.start: " + std::string(e.what()));
    }
    if (!(c.split.validation_fraction > 0.0 && c.split.validation_fraction < 1.0)) {
        throw ConfigError("split.validation_fraction must lie in (0, 1)");
    }
    if ((c.train.window_hours * 3600) % c.low_interval_seconds() != 0) {
        throw ConfigError("train.window_hours must be a whole number of low-resolution intervals");
    }
    if (c.metrics.window_hours.empty()) throw ConfigError("metrics.window_hours must not be empty");
    for (int w : c.metrics.window_hours)
        if (w < 1) throw ConfigError("metrics.window_hours entries must be >= 1");
    if (std::find(c.metrics.window_hours.begin(), c.metrics.window_hours.end(), c.metrics.primary_window_hours) ==
        c.metrics.window_hours.end()) {
        throw ConfigError("metrics.primary_window_hours must be one of metrics.window_hours");
    }
    if (c.metrics.stride_samples < 1) throw ConfigError("metrics.stride_samples must be >= 1");

    c.generator.factor = c.factor;
    c.generator.window_length = c.train.window_hours * 3600 / c.low_interval_seconds();
    c.discriminator.input_length = c.generator.window_length * c.factor;
    c.train.seed = c.seed;
    try {
        validate(c.generator);
        validate(c.discriminator);
        validate(c.train);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

RunConfig config_from_json(const nlohmann::json& doc) {
    RunConfig c;
    Section root(doc, "");
    root.read("seed", c.seed);
    root.read("factor", c.factor);
    root.section("synth", [&](Section& s) {
        s.read("n_households", c.synth.n_households);
        s.read("days", c.synth.days);
        s.read("regions", c.synth.regions);
        s.read("start", c.synth.start);
    });
    root.section("csv", [&](Section& s) {
        s.read("timestamp_column", c.csv.timestamp_column);
        s.read("household_column", c.csv.household_column);
        s.read("power_column", c.csv.power_column);
        std::string unit = to_string(c.csv.power_unit);
        s.read("power_unit", unit);
        c.csv.power_unit = parse_power_unit(unit);
        s.read("expected_interval_seconds", c.csv.expected_interval_seconds);
    });
    root.section("split", [&](Section& s) {
        s.read("train_counts", c.split.train_counts);
        std::string policy = c.split.gap_policy == GapPolicy::drop_day ? "drop_day" : "fail";
        s.read("gap_policy", policy);
        c.split.gap_policy = parse_gap_policy(policy);
        s.read("validation_fraction", c.split.validation_fraction);
    });
    root.section("generator", [&](Section& s) {
        s.read("hidden_channels", c.generator.hidden_channels);
        s.read("residual_blocks", c.generator.residual_blocks);
        s.read("outer_kernel", c.generator.outer_kernel);
        s.read("block_kernel", c.generator.block_kernel);
    });
    root.section("discriminator", [&](Section& s) {
        s.read("channels", c.discriminator.channels);
        s.read("kernel", c.discriminator.kernel);
    });
    root.section("train", [&](Section& s) {
        std::string mode = to_string(c.train.mode);
        s.read("mode", mode);
        c.train.mode = parse_train_mode(mode);
        s.read("epochs", c.train.epochs);
        s.read("batch_size", c.train.batch_size);
        s.read("generator_lr", c.train.generator_lr);
        s.read("discriminator_lr", c.train.discriminator_lr);
        s.read("adversarial_weight", c.train.adversarial_weight);
        s.read("window_hours", c.train.window_hours);
        s.read("stride_hours", c.train.stride_hours);
        s.read("patience", c.train.patience);
    });
    root.section("metrics", [&](Section& s) {
        s.read("window_hours", c.metrics.window_hours);
        s.read("primary_window_hours", c.metrics.primary_window_hours);
        s.read("stride_samples", c.metrics.stride_samples);
    });
    root.finish();
    resolve(c);
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json doc;
    doc["seed"] = c.seed;
    doc["factor"] = c.factor;
    doc["synth"] = {{"n_households", c.synth.n_households},
                    {"days", c.synth.days},
                    {"regions", c.synth.regions},
                    {"start", c.synth.start}};
    doc["csv"] = {{"timestamp_column", c.csv.timestamp_column},
                  {"household_column", c.csv.household_column},
                  {"power_column", c.csv.power_column},
                  {"power_unit", to_string(c.csv.power_unit)},
                  {"expected_interval_seconds", c.csv.expected_interval_seconds}};
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (const auto& [region, n] : c.split.train_counts) counts[region] = n;
    doc["split"] = {{"train_counts", counts},
                    {"gap_policy", c.split.gap_policy == GapPolicy::drop_day ? "drop_day" : "fail"},
                    {"validation_fraction", c.split.validation_fraction}};
    doc["generator"] = {{"hidden_channels", c.generator.hidden_channels},
                        {"residual_blocks", c.generator.residual_blocks},
                        {"outer_kernel", c.generator.outer_kernel},
                        {"block_kernel", c.generator.block_kernel}};
    doc["discriminator"] = {{"channels", c.discriminator.channels}, {"kernel", c.discriminator.kernel}};
    nlohmann::ordered_json train = {{"mode", to_string(c.train.mode)},
                                    {"epochs", c.train.epochs},
                                    {"batch_size", c.train.batch_size},
                                    {"generator_lr", nullptr},
                                    {"discriminator_lr", c.train.discriminator_lr},
                                    {"adversarial_weight", c.train.adversarial_weight},
                                    {"window_hours", c.train.window_hours},
                                    {"stride_hours", c.train.stride_hours},
                                    {"patience", c.train.patience}};
    if (c.train.generator_lr) train["generator_lr"] = *c.train.generator_lr;
    doc["train"] = train;
    doc["metrics"] = {{"window_hours", c.metrics.window_hours},
                      {"primary_window_hours", c.metrics.primary_window_hours},
                      {"stride_samples", c.metrics.stride_samples}};
    return doc;
}

// ---------------------------------------------------------------------------
// Data plumbing

std::map<std::string, std::string> load_regions(const fs::path& data_dir, const std::vector<MeterSeries>& series) {
    std::map<std::string, std::string> regions;
    const auto path = data_dir / "households.json";
    if (fs::exists(path)) {
        std::ifstream in(path);
        try {
            regions = nlohmann::json::parse(in).get<std::map<std::string, std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw IngestError("households.json is malformed: " + std::string(e.what()));
        }
    }
    std::map<std::string, std::string> out;
    for (const auto& s : series) {
        const auto it = regions.find(s.household_id);
        out[s.household_id] = it == regions.end() ? "unlabeled" : it->second;
    }
    return out;
}

namespace {

struct LoadedCorpus {
    std::vector<MeterSeries> series;
    std::map<std::string, std::string> regions;
};

LoadedCorpus load_corpus(const RunConfig& config, const fs::path& data_dir) {
    require_dir(data_dir);
    LoadedCorpus corpus;
    corpus.series = load_csv(corpus_path(data_dir), config.csv);
    if (corpus.series.empty()) throw EmptyDataError("corpus.csv has no rows");
    corpus.regions = load_regions(data_dir, corpus.series);
    return corpus;
}

std::vector<IntervalSeries> segments_of(const MeterSeries& s, GapPolicy policy) {
    try {
        return clean_gaps(s, policy);
    } catch (const EmptyDataError&) {
        spdlog::warn("household '{}' has no complete day and is ignored", s.household_id);
        return {};
    }
}

}  // namespace

EvaluationData prepare_evaluation_data(const RunConfig& config, const fs::path& data_dir,
                                       const std::optional<DatasetSplit>& split, std::size_t min_low_length) {
    auto corpus = load_corpus(config, data_dir);
    EvaluationData data;
    data.split = split ? *split : make_split(corpus.regions, config.split.train_counts, config.seed);
    if (data.split.test.empty()) throw EmptyDataError("the test split is empty");
    for (const auto& s : corpus.series) {
        if (!std::binary_search(data.split.test.begin(), data.split.test.end(), s.household_id)) continue;
        for (auto& seg : segments_of(s, config.split.gap_policy)) {
            if (seg.size() / config.factor < min_low_length) {
                ++data.excluded_segments;
                continue;
            }
            data.pairs.push_back(make_pair(std::move(seg), config.factor));
            data.groups.push_back(corpus.regions.at(s.household_id));
        }
    }
    if (data.pairs.empty()) throw EmptyDataError("no usable test series");
    if (data.excluded_segments > 0) {
        spdlog::warn("{} test segments are shorter than the model window and were left out", data.excluded_segments);
    }
    data.data_digest = digest_pairs(data.pairs);
    return data;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_synth(const RunConfig& config, const fs::path& out_dir) {
    if (config.csv.expected_interval_seconds != kQuarterHourSeconds) {
        throw ConfigError("the synthetic generator emits 900 s intervals; set csv.expected_interval_seconds to 900");
    }
    CorpusOptions options;
    options.n_households = config.synth.n_households;
    options.days = config.synth.days;
    options.regions = config.synth.regions;
    options.seed = config.seed;
    options.start = parse_timestamp(config.synth.start);
    const auto corpus = make_synthetic_corpus(options);

    prepare_out_dir(out_dir);
    std::vector<IntervalSeries> series;
    nlohmann::ordered_json regions = nlohmann::ordered_json::object();
    nlohmann::ordered_json households = nlohmann::ordered_json::array();
    for (const auto& h : corpus) {
        series.push_back(h.series);
        regions[h.series.household_id] = h.region;
        households.push_back(
            {{"id", h.series.household_id}, {"region", h.region}, {"profile", profile_json(h.profile)}});
    }
    write_csv(out_dir / "corpus.csv", series, config.csv);
    write_json(out_dir / "households.json", regions);
    write_json(out_dir / "resolved_config.json", to_json(config));
    write_manifest(out_dir, "synth", config, {"corpus.csv", "households.json", "resolved_config.json"}, {},
                   {{"households", households}});
    spdlog::info("wrote {} households x {} days to {}", corpus.size(), config.synth.days, out_dir.string());
}

void cmd_train(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir) {
    auto corpus = load_corpus(config, data_dir);
    const auto split = make_split(corpus.regions, config.split.train_counts, config.seed);
    require_training_households(split);

    std::vector<SrPair> train_pairs;
    std::vector<SrPair> val_pairs;
    for (const auto& s : corpus.series) {
        if (!split.is_train(s.household_id)) continue;
        const auto segments = segments_of(s, config.split.gap_policy);
        auto held = holdout_tail_days(segments, config.split.validation_fraction);
        for (auto& seg : held.train) train_pairs.push_back(make_pair(std::move(seg), config.factor));
        for (auto& seg : held.validation) val_pairs.push_back(make_pair(std::move(seg), config.factor));
    }
    const auto train_windows = window_dataset(train_pairs, config.train.window_hours, config.train.stride_hours);
    const auto val_windows = window_dataset(val_pairs, config.train.window_hours, config.train.stride_hours);
    spdlog::info("training {} on {} windows ({} validation) from {} households", to_string(config.train.mode),
                 train_windows.size(), val_windows.size(), split.train.size());

    prepare_out_dir(out_dir);
    TrainResult result;
    try {
        result = config.train.mode == TrainMode::cnn
                     ? train_cnn(train_windows, val_windows, config.generator, config.train)
                     : train_gan(train_windows, val_windows, config.generator, config.discriminator, config.train);
    } catch (const TrainingDivergedError& e) {
        if (e.last_good()) save_checkpoint(out_dir / "model.last_good.ckpt", *e.last_good());
        throw;
    }

    save_checkpoint(out_dir / "model.ckpt", result.model);
    std::ostringstream log;
    for (const auto& line : result.log.json_lines(config.train.mode)) log << line.dump() << '\n';
    write_text(out_dir / "train_log.jsonl", log.str());
    write_json(out_dir / "split.json", to_json(split));
    write_json(out_dir / "resolved_config.json", to_json(config));
    write_manifest(out_dir, "train", config, {"model.ckpt", "split.json", "resolved_config.json"},
                   {"train_log.jsonl"},
                   {{"mode", to_string(config.train.mode)},
                    {"best_epoch", result.log.best_epoch},
                    {"epochs_run", result.log.epochs.size()},
                    {"stopped_early", result.log.stopped_early},
                    {"train_windows", train_windows.size()},
                    {"validation_windows", val_windows.size()},
                    {"data_digest", result.model.data_digest},
                    {"warnings", result.log.warnings}});
}

EvalReport cmd_evaluate(const RunConfig& config, const fs::path& data_dir, const EvaluateOptions& options,
                        const fs::path& out_dir) {
    struct Method {
        std::string name;
        std::optional<ModelParams> model;
        nlohmann::ordered_json info;
    };
    std::vector<Method> methods;
    methods.push_back({"baseline", std::nullopt, {{"method", "baseline"}}});
    std::size_t min_length = 1;
    std::set<std::string> names{"baseline"};
    for (const auto& path : options.checkpoints) {
        auto model = load_checkpoint(path);
        if (model.generator.config().factor != config.factor) {
            throw ConfigError("checkpoint '" + path.string() + "' was trained for factor " +
                              std::to_string(model.generator.config().factor) + " but the config uses " +
                              std::to_string(config.factor));
        }
        std::string name = model.mode;
        for (int k = 2; names.count(name); ++k) name = model.mode + "_" + std::to_string(k);
        names.insert(name);
        min_length = std::max(min_length, static_cast<std::size_t>(model.generator.config().window_length));
        nlohmann::ordered_json info = {{"method", name},
                                       {"checkpoint", path.filename().string()},
                                       {"fnv1a64", file_digest(path)},
                                       {"mode", model.mode},
                                       {"training_seed", model.seed},
                                       {"data_digest", model.data_digest}};
        methods.push_back({name, std::move(model), std::move(info)});
    }

    std::optional<DatasetSplit> split;
    if (options.split) {
        std::ifstream in(*options.split);
        if (!in) throw ConfigError("cannot open split file '" + options.split->string() + "'");
        try {
            split = split_from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("split file is not valid JSON: " + std::string(e.what()));
        }
    }
    const auto data = prepare_evaluation_data(config, data_dir, split, min_length);
    const auto configs = config.metric_configs();

    EvalReport report;
    std::vector<std::vector<IntervalSeries>> reconstructions;
    for (const auto& method : methods) {
        std::vector<IntervalSeries> recs;
        recs.reserve(data.pairs.size());
        for (const auto& pair : data.pairs) {
            recs.push_back(method.model ? reconstruct_series(*method.model, pair.low)
                                        : baseline_upsample(pair.low, config.factor));
        }
        std::vector<EvalCase> cases;
        for (std::size_t i = 0; i < data.pairs.size(); ++i) cases.push_back({&data.pairs[i], &recs[i], data.groups[i]});
        auto scored = evaluate(cases, method.name, configs);
        if (reconstructions.empty()) {
            report = std::move(scored);
        } else {
            merge(report, scored);
        }
        reconstructions.push_back(std::move(recs));
    }
    nlohmann::ordered_json models = nlohmann::ordered_json::array();
    for (const auto& m : methods) models.push_back(m.info);
    report.metadata = {{"seed", config.seed},
                       {"factor", config.factor},
                       {"data_digest", data.data_digest},
                       {"test_households", data.split.test.size()},
                       {"test_series", data.pairs.size()},
                       {"excluded_segments", data.excluded_segments},
                       {"primary_window_hours", config.metrics.primary_window_hours},
                       {"models", models}};

    prepare_out_dir(out_dir);
    write_json(out_dir / "report.json", to_json(report));
    std::string table;
    for (int w : config.metrics.window_hours) table += format_table(report, w) + "\n";
    write_text(out_dir / "report.txt", table);
    std::vector<std::string> files{"report.json", "report.txt", "resolved_config.json"};
    if (options.per_series_csv) {
        std::ostringstream csv;
        csv << "household_id,region,timestamp,truth_kwh";
        for (const auto& m : methods) csv << ',' << m.name << "_kwh";
        csv << '\n';
        char buf[32];
        for (std::size_t i = 0; i < data.pairs.size(); ++i) {
            const auto& truth = data.pairs[i].high;
            for (std::size_t t = 0; t < truth.size(); ++t) {
                csv << truth.household_id << ',' << data.groups[i] << ',' << format_timestamp(truth.time_at(t));
                std::snprintf(buf, sizeof buf, ",%.17g", truth.values[t]);
                csv << buf;
                for (const auto& recs : reconstructions) {
                    std::snprintf(buf, sizeof buf, ",%.17g", recs[i].values[t]);
                    csv << buf;
                }
                csv << '\n';
            }
        }
        write_text(out_dir / "reconstructions.csv", csv.str());
        files.push_back("reconstructions.csv");
    }
    write_json(out_dir / "resolved_config.json", to_json(config));
    write_manifest(out_dir, "evaluate", config, files, {});
    return report;
}

void cmd_reconstruct(const RunConfig& config, const ReconstructOptions& options, const fs::path& out_dir) {
    const auto model = load_checkpoint(options.checkpoint);
    const int factor = model.generator.config().factor;
    CsvSchema low_schema = config.csv;
    low_schema.expected_interval_seconds = config.csv.expected_interval_seconds * factor;

    std::vector<IntervalSeries> lows;
    for (const auto& m : load_csv(options.input, low_schema)) lows.push_back(require_complete(m));
    if (lows.empty()) throw EmptyDataError("input has no rows");

    std::map<std::string, IntervalSeries> truths;
    if (options.truth) {
        CsvSchema high_schema = config.csv;
        high_schema.expected_interval_seconds = low_schema.expected_interval_seconds / factor;
        for (const auto& m : load_csv(*options.truth, high_schema)) {
            auto s = require_complete(m);
            truths.emplace(s.household_id, std::move(s));
        }
    }

    std::vector<IntervalSeries> highs;
    nlohmann::ordered_json per_series = nlohmann::ordered_json::array();
    double max_residual = 0.0;
    bool passed = true;
    constexpr double kTolerance = 1e-6;
    std::ostringstream trace;
    trace << "household_id,timestamp,low_kwh,baseline_kwh,reconstructed_kwh" << (options.truth ? ",true_kwh" : "")
          << '\n';
    char buf[128];
    for (const auto& low : lows) {
        auto high = reconstruct_series(model, low);
        const auto check = check_energy_constraint(low.values, high.values, factor, kTolerance);
        max_residual = std::max(max_residual, check.max_residual);
        passed = passed && check.passed;
        nlohmann::ordered_json entry = {{"household_id", low.household_id},
                                        {"low_intervals", low.size()},
                                        {"high_intervals", high.size()},
                                        {"max_residual", check.max_residual},
                                        {"constraint_passed", check.passed}};
        const IntervalSeries* truth = nullptr;
        if (options.truth) {
            const auto it = truths.find(low.household_id);
            if (it == truths.end()) throw IngestError("no ground truth for household '" + low.household_id + "'");
            truth = &it->second;
            if (truth->start_time != low.start_time || truth->size() != high.size()) {
                throw IngestError("ground truth for household '" + low.household_id +
                                  "' does not cover the same interval as the input");
            }
            entry["mse"] = mse(truth->values, high.values);
            nlohmann::ordered_json wpe_by_window = nlohmann::ordered_json::object();
            for (const auto& mc : config.metric_configs()) {
                if (truth->size() >= static_cast<std::size_t>(mc.window_samples())) {
                    wpe_by_window[std::to_string(mc.window_hours)] = wpe(truth->values, high.values, mc);
                }
            }
            entry["wpe"] = wpe_by_window;
        }
        per_series.push_back(entry);
        for (std::size_t t = 0; t < high.size(); ++t) {
            const double hourly = low.values[t / factor];
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g", hourly, hourly / factor, high.values[t]);
            trace << low.household_id << ',' << format_timestamp(high.time_at(t)) << buf;
            if (truth) {
                std::snprintf(buf, sizeof buf, ",%.17g", truth->values[t]);
                trace << buf;
            }
            trace << '\n';
        }
        highs.push_back(std::move(high));
    }

    prepare_out_dir(out_dir);
    CsvSchema out_schema = config.csv;
    out_schema.expected_interval_seconds = low_schema.expected_interval_seconds / factor;
    write_csv(out_dir / "reconstruction.csv", highs, out_schema);
    write_text(out_dir / "trace.csv", trace.str());
    nlohmann::ordered_json sidecar = {
        {"checkpoint", options.checkpoint.filename().string()},
        {"mode", model.mode},
        {"factor", factor},
        {"constraint", {{"tolerance", kTolerance}, {"max_residual", max_residual}, {"passed", passed}}},
        {"series", per_series}};
    write_json(out_dir / "reconstruction.json", sidecar);
    write_json(out_dir / "resolved_config.json", to_json(config));
    write_manifest(out_dir, "reconstruct", config,
                   {"reconstruction.csv", "reconstruction.json", "trace.csv", "resolved_config.json"}, {});
    if (!passed) throw NumericError("reconstruction broke the energy constraint (max residual " +
                                    std::to_string(max_residual) + ")");
}

// ---------------------------------------------------------------------------
// Entry point

void configure_logging(const std::string& fallback_level) {
    auto logger = spdlog::stderr_logger_mt("srr-stderr");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    const char* env = std::getenv("SRR_LOG_LEVEL");
    spdlog::set_level(spdlog::level::from_str(env ? env : fallback_level));
}

namespace {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericError*>(&e)) return kNumericError;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const CheckpointError*>(&e) ||
        dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const InvalidFactorError*>(&e)) {
        return kUsageError;
    }
    if (dynamic_cast<const IngestError*>(&e) || dynamic_cast<const EmptyDataError*>(&e) ||
        dynamic_cast<const InsufficientLengthError*>(&e) || dynamic_cast<const StructuralError*>(&e) ||
        dynamic_cast<const AllocationError*>(&e)) {
        return kDataError;
    }
    return kUsageError;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    if (!spdlog::get("srr-stderr")) configure_logging();

    CLI::App cli{"Super-resolution reconstruction of interval energy data"};
    cli.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    cli.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cli.add_option("--seed", seed, "Override the configured seed");
    cli.add_option("--out", out_dir, "Output directory")->required();

    std::string data_dir;
    std::optional<std::string> mode;
    std::optional<int> epochs;
    std::vector<std::string> checkpoints;
    std::string split_path;
    bool per_series = false;
    std::string checkpoint;
    std::string input;
    std::string truth;

    auto* synth = cli.add_subcommand("synth", "Write a synthetic corpus");
    synth->fallthrough();
    auto* train = cli.add_subcommand("train", "Train a cnn or gan model");
    train->fallthrough();
    train->add_option("--data", data_dir, "Directory holding corpus.csv")->required();
    train->add_option("--mode", mode, "cnn or gan (overrides train.mode)");
    train->add_option("--epochs", epochs, "Override train.epochs");
    auto* evaluate = cli.add_subcommand("evaluate", "Score the baseline and checkpoints on the test split");
    evaluate->fallthrough();
    evaluate->add_option("--data", data_dir, "Directory holding corpus.csv")->required();
    evaluate->add_option("--checkpoint", checkpoints, "Model checkpoint (repeatable)");
    evaluate->add_option("--split", split_path, "split.json written by train");
    evaluate->add_flag("--per-series-csv", per_series, "Also write every reconstruction as CSV");
    auto* reconstruct = cli.add_subcommand("reconstruct", "Upsample an hourly CSV with a checkpoint");
    reconstruct->fallthrough();
    reconstruct->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    reconstruct->add_option("--input", input, "Hourly CSV")->required();
    reconstruct->add_option("--truth", truth, "Optional high-resolution ground truth CSV");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        RunConfig config;
        if (!config_path.empty()) {
            config = load_run_config(config_path);
        } else {
            resolve(config);
        }
        if (seed) config.seed = *seed;
        if (mode) config.train.mode = parse_train_mode(*mode);
        if (epochs) config.train.epochs = *epochs;
        resolve(config);

        if (synth->parsed()) {
            cmd_synth(config, out_dir);
        } else if (train->parsed()) {
            cmd_train(config, data_dir, out_dir);
        } else if (evaluate->parsed()) {
            EvaluateOptions options;
            for (const auto& c : checkpoints) options.checkpoints.emplace_back(c);
            if (!split_path.empty()) options.split = split_path;
            options.per_series_csv = per_series;
            const auto report = cmd_evaluate(config, data_dir, options, out_dir);
            std::cout << format_table(report, config.metrics.primary_window_hours);
        } else if (reconstruct->parsed()) {
            ReconstructOptions options{checkpoint, input, std::nullopt};
            if (!truth.empty()) options.truth = truth;
            cmd_reconstruct(config, options, out_dir);
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return exit_code_for(e);
    }
    return kOk;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("srr");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace srr::app
