#include <doctest.h>

#include <cmath>

#include "oracles/oracles.hpp"
#include "helpers.hpp"
#include "srr/errors.hpp"
#include "srr/ingest.hpp"
#include "srr/synth.hpp"
#include "srr/training.hpp"

using namespace srr;

namespace {

GeneratorConfig tiny(int window_length = 24) {
    GeneratorConfig c;
    c.window_length = window_length;
    c.hidden_channels = 8;
    c.residual_blocks = 1;
    c.outer_kernel = 5;
    return c;
}

std::vector<SrPair> peaky_windows(int households, int days, std::uint64_t seed) {
    CorpusOptions o;
    o.n_households = households;
    o.days = days;
    o.seed = seed;
    std::vector<SrPair> pairs;
    for (const auto& h : make_synthetic_corpus(o)) pairs.push_back(make_pair(h.series, 4));
    return window_dataset(pairs, 24, 12);
}

std::vector<const SrPair*> pointers(const std::vector<SrPair>& windows, std::size_t n) {
    std::vector<const SrPair*> out;
    for (std::size_t i = 0; i < n && i < windows.size(); ++i) out.push_back(&windows[i]);
    return out;
}

}  // namespace

TEST_CASE("normalization statistics") {
    const std::vector<SrPair> w{make_pair(testing::series({1, 1, 1, 1, 2, 2, 2, 2}), 4)};
    const auto n = fit_normalization(w);
    CHECK(n.mean == 6.0);
    CHECK(n.stddev == 2.0);
    const std::vector<SrPair> flat{make_pair(testing::series({1, 1, 1, 1}), 4)};
    CHECK(fit_normalization(flat).stddev == 1.0);
}

TEST_CASE("content gradient matches finite differences of the batch loss") {
    const auto windows = peaky_windows(2, 3, 5);
    Generator g(tiny());
    g.initialize(3);
    for (auto& p : g.parameters()) p *= 2.0;
    const auto norm = fit_normalization(windows);
    const auto batch = pointers(windows, 3);
    const std::vector<SrPair> batch_copy(windows.begin(), windows.begin() + 3);

    const auto grad = content_gradient(g, norm, batch);
    CHECK(grad.content_loss == doctest::Approx(window_mse(g, norm, batch_copy)).epsilon(1e-12));
    CHECK(grad.constraint_violations == 0);
    auto params = g.parameters();
    for (std::size_t i = 0; i < params.size(); i += 11) {
        const double fd = oracle::central_difference([&] { return window_mse(g, norm, batch_copy); }, params[i], 1e-3);
        CHECK(oracle::relative_close(fd, grad.grad[i], 1e-2));
    }
}

TEST_CASE("zero adversarial weight reduces to the content gradient") {
    const auto windows = peaky_windows(2, 3, 6);
    Generator g(tiny());
    g.initialize(4);
    DiscriminatorConfig dc;
    dc.channels = {4, 8};
    dc.input_length = 96;
    Discriminator d(dc);
    d.initialize(5);
    const auto norm = fit_normalization(windows);
    const auto batch = pointers(windows, 4);
    const auto cnn = content_gradient(g, norm, batch);
    const auto gan = adversarial_generator_gradient(g, d, norm, batch, 0.0);
    CHECK(gan.content_loss == cnn.content_loss);
    CHECK(gan.grad == cnn.grad);
    CHECK(gan.adversarial_loss > 0.0);
    const auto weighted = adversarial_generator_gradient(g, d, norm, batch, 1.0);
    CHECK(weighted.grad != cnn.grad);
}

TEST_CASE("piecewise-constant truth is learned to baseline accuracy") {
    auto windows = peaky_windows(3, 6, 8);
    for (auto& w : windows) {
        w.high = baseline_upsample(w.low, 4);
    }
    const std::vector<SrPair> train(windows.begin(), windows.end() - 4);
    const std::vector<SrPair> val(windows.end() - 4, windows.end());
    TrainConfig c;
    c.epochs = 60;
    c.batch_size = 8;
    c.patience = 60;
    const auto result = train_cnn(train, val, tiny(), c);
    CHECK(result.log.epochs[result.log.best_epoch - 1].val_mse <= 1e-4);
    CHECK(window_mse(result.model.generator, result.model.normalization, val) <= 1e-4);
}

TEST_CASE("a single window can be overfit past the baseline") {
    const auto windows = peaky_windows(1, 2, 9);
    const std::vector<SrPair> one{windows[0]};
    TrainConfig c;
    c.epochs = 500;
    c.batch_size = 1;
    c.patience = 500;
    const auto result = train_cnn(one, one, GeneratorConfig{}, c);
    const double baseline = oracle::mse(one[0].high.values, oracle::repeat_quarters(one[0].low.values, 4));
    CHECK(window_mse(result.model.generator, result.model.normalization, one) < baseline);
}

TEST_CASE("training is deterministic and reduces the loss") {
    const auto windows = peaky_windows(3, 4, 10);
    const std::vector<SrPair> train(windows.begin(), windows.end() - 3);
    const std::vector<SrPair> val(windows.end() - 3, windows.end());
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 4;
    const auto a = train_cnn(train, val, tiny(), c);
    const auto b = train_cnn(train, val, tiny(), c);
    CHECK(serialize_checkpoint(a.model) == serialize_checkpoint(b.model));
    CHECK(a.log.epochs.back().train_mse < a.log.epochs.front().train_mse);

    Generator initial(tiny());
    initial.initialize(c.seed);
    CHECK(a.log.epochs.back().train_mse < window_mse(initial, fit_normalization(train), train));
}

TEST_CASE("gan training with zero adversarial weight tracks cnn training") {
    const auto windows = peaky_windows(3, 3, 11);
    const std::vector<SrPair> train(windows.begin(), windows.end() - 2);
    const std::vector<SrPair> val(windows.end() - 2, windows.end());
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 4;
    c.generator_lr = 1e-3;
    const auto cnn = train_cnn(train, val, tiny(), c);
    c.mode = TrainMode::gan;
    c.adversarial_weight = 0.0;
    DiscriminatorConfig dc;
    dc.channels = {4, 8};
    const auto gan = train_gan(train, val, tiny(), dc, c);
    REQUIRE(gan.log.epochs.size() == cnn.log.epochs.size());
    for (std::size_t e = 0; e < cnn.log.epochs.size(); ++e) {
        CHECK(gan.log.epochs[e].train_mse == cnn.log.epochs[e].train_mse);
        CHECK(gan.log.epochs[e].val_mse == cnn.log.epochs[e].val_mse);
        CHECK(gan.log.epochs[e].constraint_violations == 0);
    }
    CHECK(std::equal(gan.model.generator.parameters().begin(), gan.model.generator.parameters().end(),
                     cnn.model.generator.parameters().begin()));
    REQUIRE(gan.model.discriminator);
    CHECK(gan.model.discriminator->config().input_length == 96);
    CHECK(gan.log.json_lines(TrainMode::gan)[0]["losses"].contains("discriminator"));
}

TEST_CASE("divergence aborts with the last good parameters") {
    const auto windows = peaky_windows(2, 2, 12);
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 2;
    c.generator_lr = 1e300;
    try {
        train_cnn(windows, windows, tiny(), c);
        FAIL("expected divergence");
    } catch (const TrainingDivergedError& e) {
        REQUIRE(e.last_good());
        for (double p : e.last_good()->generator.parameters()) CHECK(std::isfinite(p));
    }
}

TEST_CASE("training input errors") {
    TrainConfig c;
    CHECK_THROWS_AS(train_cnn({}, {}, tiny(), c), EmptyDataError);
    c.batch_size = 0;
    CHECK_THROWS_AS(validate(c), ValidationError);
    CHECK_THROWS_AS(parse_train_mode("rnn"), ValidationError);
    CHECK(parse_train_mode("gan") == TrainMode::gan);
    CHECK(TrainConfig{}.effective_generator_lr() == 1e-3);
}

TEST_CASE("reconstruct_series stitches windows") {
    ModelParams m;
    m.generator = Generator(tiny());
    m.generator.initialize(14);
    for (auto& p : m.generator.parameters()) p *= 3.0;
    m.normalization = {1.0, 0.5};

    Rng rng(15);
    std::vector<double> low(49);
    for (auto& v : low) v = rng.uniform(0.0, 3.0);
    const auto series = testing::series(low, 3600);
    const auto rec = reconstruct_series(m, series);
    REQUIRE(rec.size() == 49 * 4);
    CHECK(rec.interval_seconds == 900);
    CHECK(check_energy_constraint(low, rec.values, 4, 1e-6).passed);

    auto window_out = [&](std::size_t offset) {
        return m.generator.forward(std::span<const double>(low).subspan(offset, 24), m.normalization).high;
    };
    const auto first = window_out(0);
    const auto second = window_out(24);
    const auto tail = window_out(25);
    for (std::size_t i = 0; i < 96; ++i) {
        CHECK(rec.values[i] == first[i]);
        CHECK(rec.values[96 + i] == second[i]);
    }
    for (std::size_t i = 0; i < 4; ++i) CHECK(rec.values[192 + i] == tail[92 + i]);

    const auto exact = reconstruct_series(m, testing::series(std::vector<double>(48, 1.0), 3600));
    CHECK(exact.size() == 192);
    CHECK_THROWS_AS(reconstruct_series(m, testing::series(std::vector<double>(23, 1.0), 3600)),
                    InsufficientLengthError);
}

TEST_CASE("uniform parameters on a constant series give the baseline") {
    ModelParams m;
    m.mode = "uniform";
    m.generator = Generator(tiny());
    m.generator.initialize(1);
    m.generator.set_uniform_allocation();
    const auto rec = reconstruct_series(m, testing::series(std::vector<double>(30, 2.0), 3600));
    for (double v : rec.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}
