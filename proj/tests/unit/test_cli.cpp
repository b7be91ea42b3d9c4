#include <doctest.h>

#include <fstream>
#include <set>

#include "helpers.hpp"
#include "srr/app.hpp"
#include "srr/errors.hpp"
#include "srr/synth.hpp"

using namespace srr;
using namespace srr::app;

namespace {

// Six households, ten days, a tiny generator: enough to exercise every path.
const char* kSmallConfig = R"({
  "seed": 7,
  "synth": {"n_households": 6, "days": 10},
  "split": {"train_counts": {"CA": 1, "NY": 1, "TX": 0}},
  "generator": {"hidden_channels": 8, "residual_blocks": 1, "outer_kernel": 5},
  "discriminator": {"channels": [4, 8]},
  "train": {"epochs": 2, "batch_size": 8, "generator_lr": 0.001}
})";

fs::path write_config(const fs::path& dir, const std::string& text, const std::string& name = "config.json") {
    std::ofstream(dir / name) << text;
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

struct SmallRun {
    fs::path dir;
    fs::path config;
    fs::path data;

    explicit SmallRun(const std::string& name) : dir(testing::scratch_dir(name)) {
        config = write_config(dir, kSmallConfig);
        data = dir / "data";
        REQUIRE(run_cli({"synth", "--config", config.string(), "--out", data.string()}) == kOk);
    }
};

}  // namespace

TEST_CASE("default synth mirrors the three-state corpus") {
    const auto dir = testing::scratch_dir("cli_synth_default");
    REQUIRE(run_cli({"synth", "--out", (dir / "a").string()}) == kOk);
    const auto regions = read_json(dir / "a" / "households.json");
    CHECK(regions.size() == 73);
    std::set<std::string> labels;
    for (const auto& item : regions.items()) labels.insert(item.value().get<std::string>());
    CHECK(labels == std::set<std::string>{"CA", "NY", "TX"});
    CHECK(fs::exists(dir / "a" / "resolved_config.json"));

    REQUIRE(run_cli({"synth", "--out", (dir / "b").string()}) == kOk);
    for (const char* f : {"corpus.csv", "households.json", "manifest.json", "resolved_config.json"}) {
        CHECK(file_digest(dir / "a" / f) == file_digest(dir / "b" / f));
    }
    const auto manifest = read_json(dir / "a" / "manifest.json");
    CHECK(manifest["files"]["corpus.csv"]["fnv1a64"] == file_digest(dir / "a" / "corpus.csv"));
}

TEST_CASE("config parsing") {
    const auto c = config_from_json(nlohmann::json::parse(kSmallConfig));
    CHECK(c.seed == 7);
    CHECK(c.train.seed == 7);
    CHECK(c.generator.window_length == 24);
    CHECK(c.generator.factor == 4);
    CHECK(c.discriminator.input_length == 96);
    CHECK(c.metrics.window_hours == std::vector<int>{1, 3, 6});

    const auto round = config_from_json(nlohmann::json::parse(to_json(c).dump()));
    CHECK(to_json(round) == to_json(c));
    CHECK_FALSE(config_from_json(nlohmann::json::parse(R"({"train": {"generator_lr": null}})")).train.generator_lr);

    CHECK_THROWS_WITH_AS(config_from_json(nlohmann::json::parse(R"({"train": {"epoch": 3}})")),
                         doctest::Contains("train.epoch"), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"seed": "x"})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"metrics": {"primary_window_hours": 2}})")),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"generator": {"outer_kernel": 4}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"split": {"gap_policy": "skip"}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse("[]")), ConfigError);
}

TEST_CASE("invalid config key exits nonzero without output") {
    const auto dir = testing::scratch_dir("cli_bad_key");
    const auto config = write_config(dir, R"({"synth": {"households": 5}})");
    CHECK(run_cli({"synth", "--config", config.string(), "--out", (dir / "out").string()}) == kUsageError);
    CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("usage errors") {
    CHECK(run_cli({"bogus", "--out", "x"}) == kUsageError);
    CHECK(run_cli({"synth"}) == kUsageError);
    CHECK(run_cli({"--help"}) == kOk);
}

TEST_CASE("missing data directory is named") {
    const auto dir = testing::scratch_dir("cli_missing_data");
    const auto missing = dir / "nowhere";
    CHECK(run_cli({"train", "--data", missing.string(), "--out", (dir / "out").string()}) == kDataError);
    CHECK_THROWS_WITH_AS(cmd_train(RunConfig{}, missing, dir / "out"), doctest::Contains(missing.string().c_str()),
                         IngestError);
}

TEST_CASE("train, evaluate and reconstruct end to end") {
    SmallRun run("cli_end_to_end");
    const auto cnn = run.dir / "cnn";
    REQUIRE(run_cli({"train", "--config", run.config.string(), "--data", run.data.string(), "--out", cnn.string()}) ==
            kOk);
    for (const char* f : {"model.ckpt", "train_log.jsonl", "split.json", "manifest.json", "resolved_config.json"}) {
        CHECK(fs::exists(cnn / f));
    }
    const auto model = load_checkpoint(cnn / "model.ckpt");
    CHECK(model.mode == "cnn");
    CHECK(model.generator.config().hidden_channels == 8);

    SUBCASE("evaluate") {
        const auto out = run.dir / "eval";
        REQUIRE(run_cli({"evaluate", "--config", run.config.string(), "--data", run.data.string(), "--checkpoint",
                         (cnn / "model.ckpt").string(), "--split", (cnn / "split.json").string(), "--per-series-csv",
                         "--out", out.string()}) == kOk);
        const auto report = read_json(out / "report.json");
        REQUIRE(report["groups"].size() == 3);
        for (const auto& g : report["groups"]) {
            REQUIRE(g["methods"].size() == 2);
            CHECK(g["methods"][0]["method"] == "baseline");
            CHECK(g["methods"][1]["method"] == "cnn");
            CHECK(g["methods"][1]["constraint_violations"] == 0);
            CHECK(g["methods"][0]["wpe"].size() == 3);
        }
        CHECK(report["metadata"]["models"][1]["fnv1a64"] == file_digest(cnn / "model.ckpt"));
        const auto table = slurp(out / "report.txt");
        CHECK(table.find("cnn") != std::string::npos);
        CHECK(table.find("TX") != std::string::npos);
        CHECK(slurp(out / "reconstructions.csv").rfind("household_id,region,timestamp,truth_kwh,baseline_kwh,cnn_kwh", 0) == 0);
    }

    SUBCASE("evaluate rejects a checkpoint trained for another factor") {
        const auto config = write_config(run.dir, R"({"factor": 2})", "factor2.json");
        CHECK(run_cli({"evaluate", "--config", config.string(), "--data", run.data.string(), "--checkpoint",
                       (cnn / "model.ckpt").string(), "--out", (run.dir / "bad").string()}) == kUsageError);
    }

    SUBCASE("reconstruct") {
        // Hourly input built from the first household's corpus rows.
        const auto corpus = load_csv(run.data / "corpus.csv", CsvSchema{});
        IntervalSeries high = require_complete(corpus[0]);
        high.values.resize(96 * 2 + 20);
        auto low = downsample(high, 4);
        CsvSchema hourly;
        hourly.expected_interval_seconds = 3600;
        write_csv(run.dir / "hourly.csv", std::vector<IntervalSeries>{low}, hourly);
        write_csv(run.dir / "truth.csv", std::vector<IntervalSeries>{high}, CsvSchema{});

        const auto out = run.dir / "rec";
        REQUIRE(run_cli({"reconstruct", "--config", run.config.string(), "--checkpoint", (cnn / "model.ckpt").string(),
                         "--input", (run.dir / "hourly.csv").string(), "--truth", (run.dir / "truth.csv").string(),
                         "--out", out.string()}) == kOk);
        const auto rec = load_csv(out / "reconstruction.csv", CsvSchema{});
        REQUIRE(rec.size() == 1);
        CHECK(rec[0].values.size() == 4 * low.size());
        CHECK(check_energy_constraint(low.values, rec[0].values, 4, 1e-6).passed);
        const auto sidecar = read_json(out / "reconstruction.json");
        CHECK(sidecar["constraint"]["passed"] == true);
        CHECK(sidecar["series"][0].contains("mse"));
        CHECK(sidecar["series"][0]["wpe"].contains("3"));
        std::ifstream trace(out / "trace.csv");
        std::string line;
        std::size_t rows = 0;
        while (std::getline(trace, line)) ++rows;
        CHECK(rows == 1 + 4 * low.size());

        low.values.resize(10);
        write_csv(run.dir / "short.csv", std::vector<IntervalSeries>{low}, hourly);
        CHECK(run_cli({"reconstruct", "--checkpoint", (cnn / "model.ckpt").string(), "--input",
                       (run.dir / "short.csv").string(), "--out", (run.dir / "short").string()}) == kDataError);
    }
}

TEST_CASE("uniform checkpoint reconstructs equal quarters") {
    const auto dir = testing::scratch_dir("cli_uniform");
    ModelParams m;
    m.mode = "uniform";
    GeneratorConfig gc;
    gc.hidden_channels = 4;
    gc.residual_blocks = 0;
    m.generator = Generator(gc);
    m.generator.initialize(1);
    m.generator.set_uniform_allocation();
    save_checkpoint(dir / "uniform.ckpt", m);
    std::ofstream csv(dir / "in.csv");
    csv << "timestamp,household_id,energy_kwh\n";
    for (int h = 0; h < 30; ++h) {
        char ts[32];
        std::snprintf(ts, sizeof ts, "2021-02-%02dT%02d:00:00Z", 3 + h / 24, h % 24);
        csv << ts << ",x,2.0\n";
    }
    csv.close();
    REQUIRE(run_cli({"reconstruct", "--checkpoint", (dir / "uniform.ckpt").string(), "--input",
                     (dir / "in.csv").string(), "--out", (dir / "out").string()}) == kOk);
    const auto rec = load_csv(dir / "out" / "reconstruction.csv", CsvSchema{});
    REQUIRE(rec[0].values.size() == 120);
    for (double v : rec[0].values) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("empty test split exits nonzero") {
    SmallRun run("cli_empty_test");
    const auto config = write_config(run.dir, R"({"synth": {"n_households": 6, "days": 10},
        "split": {"train_counts": {"CA": 2, "NY": 2, "TX": 2}}})", "all_train.json");
    CHECK(run_cli({"evaluate", "--config", config.string(), "--data", run.data.string(), "--out",
                   (run.dir / "eval").string()}) == kDataError);
    const auto none = write_config(run.dir, R"({"split": {"train_counts": {"CA": 0, "NY": 0, "TX": 0}}})", "none.json");
    CHECK(run_cli({"train", "--config", none.string(), "--data", run.data.string(), "--out",
                   (run.dir / "train").string()}) == kDataError);
}

TEST_CASE("gan with zero adversarial weight records cnn losses") {
    SmallRun run("cli_gan_zero");
    const auto gan_config = write_config(run.dir, R"({
      "seed": 7,
      "synth": {"n_households": 6, "days": 10},
      "split": {"train_counts": {"CA": 1, "NY": 1, "TX": 0}},
      "generator": {"hidden_channels": 8, "residual_blocks": 1, "outer_kernel": 5},
      "discriminator": {"channels": [4, 8]},
      "train": {"mode": "gan", "adversarial_weight": 0.0, "epochs": 2, "batch_size": 8, "generator_lr": 0.001}
    })", "gan.json");
    REQUIRE(run_cli({"train", "--config", run.config.string(), "--data", run.data.string(), "--out",
                     (run.dir / "cnn").string()}) == kOk);
    REQUIRE(run_cli({"train", "--config", gan_config.string(), "--data", run.data.string(), "--out",
                     (run.dir / "gan").string()}) == kOk);
    std::ifstream a(run.dir / "cnn" / "train_log.jsonl");
    std::ifstream b(run.dir / "gan" / "train_log.jsonl");
    std::string la, lb;
    int lines = 0;
    while (std::getline(a, la) && std::getline(b, lb)) {
        const auto ja = nlohmann::json::parse(la);
        const auto jb = nlohmann::json::parse(lb);
        CHECK(ja["losses"]["train_mse"] == jb["losses"]["train_mse"]);
        CHECK(ja["val"]["mse"] == jb["val"]["mse"]);
        ++lines;
    }
    CHECK(lines == 2);
}

TEST_CASE("divergence exits with the numeric code and keeps the last good checkpoint") {
    SmallRun run("cli_diverge");
    const auto config = write_config(run.dir, R"({
      "synth": {"n_households": 6, "days": 10},
      "split": {"train_counts": {"CA": 1, "NY": 1, "TX": 0}},
      "generator": {"hidden_channels": 4, "residual_blocks": 0, "outer_kernel": 3},
      "train": {"epochs": 2, "generator_lr": 1e300}
    })", "diverge.json");
    const auto out = run.dir / "train";
    CHECK(run_cli({"train", "--config", config.string(), "--data", run.data.string(), "--out", out.string()}) ==
          kNumericError);
    CHECK(fs::exists(out / "model.last_good.ckpt"));
    CHECK_FALSE(fs::exists(out / "model.ckpt"));
}

TEST_CASE("unwritable output path exits nonzero") {
    const auto dir = testing::scratch_dir("cli_unwritable");
    std::ofstream(dir / "file") << "x";
    CHECK(run_cli({"synth", "--out", (dir / "file" / "sub").string()}) == kUsageError);
}
