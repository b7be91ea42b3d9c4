#include "srr/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "srr/random.hpp"

namespace srr {

TrainMode parse_train_mode(const std::string& text) {
    if (text == "cnn") return TrainMode::cnn;
    if (text == "gan") return TrainMode::gan;
    throw ConfigError("unknown training mode '" + text + "' (expected cnn or gan)");
}

std::string to_string(TrainMode mode) { return mode == TrainMode::cnn ? "cnn" : "gan"; }

void validate(const TrainConfig& c) {
    if (c.epochs < 1) throw ValidationError("epochs must be >= 1");
    if (c.batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (!(c.effective_generator_lr() > 0.0)) throw ValidationError("generator learning rate must be positive");
    if (!(c.discriminator_lr > 0.0)) throw ValidationError("discriminator learning rate must be positive");
    if (!(c.adversarial_weight >= 0.0) || !std::isfinite(c.adversarial_weight)) {
        throw ValidationError("adversarial_weight must be finite and >= 0");
    }
    if (c.window_hours < 1 || c.stride_hours < 1) throw ValidationError("window and stride must be >= 1 hour");
    if (c.patience < 1) throw ValidationError("patience must be >= 1");
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
    return {{"mode", to_string(c.mode)},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"generator_lr", c.effective_generator_lr()},
            {"discriminator_lr", c.discriminator_lr},
            {"adversarial_weight", c.adversarial_weight},
            {"window_hours", c.window_hours},
            {"stride_hours", c.stride_hours},
            {"seed", c.seed},
            {"patience", c.patience}};
}

std::vector<nlohmann::ordered_json> TrainingLog::json_lines(TrainMode mode) const {
    std::vector<nlohmann::ordered_json> lines;
    for (const auto& e : epochs) {
        nlohmann::ordered_json losses = {{"train_mse", e.train_mse}};
        if (mode == TrainMode::gan) {
            losses["discriminator"] = e.discriminator_loss;
            losses["adversarial"] = e.adversarial_loss;
        }
        lines.push_back({{"epoch", e.epoch},
                         {"losses", losses},
                         {"val", {{"mse", e.val_mse}}},
                         {"constraint_violations", e.constraint_violations},
                         {"improved", e.improved},
                         {"wall_seconds", e.wall_seconds}});
    }
    return lines;
}

Normalization fit_normalization(std::span<const SrPair> windows) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& w : windows) {
        for (double v : w.low.values) sum += v;
        n += w.low.size();
    }
    if (n == 0) throw EmptyDataError("cannot fit normalization on empty data");
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (const auto& w : windows)
        for (double v : w.low.values) sq += (v - mean) * (v - mean);
    const double stddev = std::sqrt(sq / static_cast<double>(n));
    return {mean, stddev > 1e-12 ? stddev : 1.0};
}

namespace {

std::size_t batch_samples(std::span<const SrPair* const> batch) {
    std::size_t n = 0;
    for (const auto* w : batch) n += w->high.size();
    return n;
}

// Adds d(content)/d(high) for one window into `dhigh`; returns the squared error sum.
double content_term(const std::vector<double>& generated, const std::vector<double>& truth, double scale,
                    std::vector<double>& dhigh) {
    double sq = 0.0;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        const double d = generated[i] - truth[i];
        sq += d * d;
        dhigh[i] = 2.0 * d * scale;
    }
    return sq;
}

std::size_t count_violations(const SrPair& window, const std::vector<double>& generated) {
    return check_energy_constraint(window.low.values, generated, window.factor, 1e-6).passed ? 0 : 1;
}

void check_batch(const Generator& generator, std::span<const SrPair* const> batch) {
    if (batch.empty()) throw EmptyDataError("empty training batch");
    const auto& c = generator.config();
    for (const auto* w : batch) {
        if (w->factor != c.factor || w->low.size() != static_cast<std::size_t>(c.window_length) ||
            w->high.size() != static_cast<std::size_t>(c.window_length) * c.factor) {
            throw StructuralError("training window does not match the generator's window length and factor");
        }
    }
}

}  // namespace

BatchGradient content_gradient(const Generator& generator, const Normalization& norm,
                               std::span<const SrPair* const> batch) {
    check_batch(generator, batch);
    BatchGradient out;
    out.grad.assign(generator.parameter_count(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch_samples(batch));
    Generator::Tape tape;
    std::vector<double> dhigh;
    double sq = 0.0;
    for (const auto* w : batch) {
        const auto gen = generator.forward(w->low.values, norm, tape);
        dhigh.resize(gen.high.size());
        sq += content_term(gen.high, w->high.values, scale, dhigh);
        out.constraint_violations += count_violations(*w, gen.high);
        generator.backward(tape, dhigh, out.grad);
    }
    out.content_loss = sq * scale;
    return out;
}

BatchGradient adversarial_generator_gradient(const Generator& generator, const Discriminator& discriminator,
                                             const Normalization& norm, std::span<const SrPair* const> batch,
                                             double adversarial_weight) {
    check_batch(generator, batch);
    BatchGradient out;
    out.grad.assign(generator.parameter_count(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch_samples(batch));
    const double per_window = 1.0 / static_cast<double>(batch.size());
    const int factor = generator.config().factor;

    Generator::Tape tape;
    Discriminator::Tape disc_tape;
    std::vector<double> disc_scratch(discriminator.parameter_count());
    std::vector<double> dcontent;
    std::vector<double> dadv;
    double sq = 0.0;
    double adv = 0.0;
    for (const auto* w : batch) {
        const auto gen = generator.forward(w->low.values, norm, tape);
        dcontent.resize(gen.high.size());
        sq += content_term(gen.high, w->high.values, scale, dcontent);
        out.constraint_violations += count_violations(*w, gen.high);

        const double logit = discriminator.forward(gen.high, norm, factor, disc_tape);
        adv += nn::softplus(-logit) * per_window;
        dadv.assign(gen.high.size(), 0.0);
        discriminator.backward(disc_tape, -nn::sigmoid(-logit) * per_window, norm, factor, disc_scratch, dadv);

        for (std::size_t i = 0; i < dcontent.size(); ++i) dcontent[i] += adversarial_weight * dadv[i];
        generator.backward(tape, dcontent, out.grad);
    }
    out.content_loss = sq * scale;
    out.adversarial_loss = adv;
    return out;
}

double window_mse(const Generator& generator, const Normalization& norm, std::span<const SrPair> windows) {
    double sq = 0.0;
    std::size_t n = 0;
    Generator::Tape tape;
    for (const auto& w : windows) {
        const auto gen = generator.forward(w.low.values, norm, tape);
        for (std::size_t i = 0; i < gen.high.size(); ++i) {
            const double d = gen.high[i] - w.high.values[i];
            sq += d * d;
        }
        n += gen.high.size();
    }
    if (n == 0) throw EmptyDataError("no windows to score");
    return sq / static_cast<double>(n);
}

namespace {

std::string digest_windows(std::span<const SrPair> train, std::span<const SrPair> validation) {
    Fnv1a h;
    for (auto set : {train, validation}) {
        for (const auto& w : set) {
            h.update(w.low.household_id);
            for (double v : w.low.values) h.update(v);
            for (double v : w.high.values) h.update(v);
        }
        h.update("|");
    }
    return h.hex();
}

struct LoopState {
    ModelParams best;
    double best_val = std::numeric_limits<double>::infinity();
    int since_improvement = 0;
};

void require_data(std::span<const SrPair> train, std::span<const SrPair> validation) {
    if (train.empty()) throw EmptyDataError("no training windows");
    if (validation.empty()) throw EmptyDataError("no validation windows");
}

// Shared epoch bookkeeping: validation, early stopping, logging.
bool finish_epoch(EpochRecord& record, const ModelParams& current, std::span<const SrPair> validation,
                  LoopState& state, TrainingLog& log, const TrainConfig& config) {
    record.val_mse = window_mse(current.generator, current.normalization, validation);
    if (!std::isfinite(record.val_mse) || !std::isfinite(record.train_mse)) {
        throw TrainingDivergedError("non-finite loss in epoch " + std::to_string(record.epoch), state.best);
    }
    record.improved = record.val_mse < state.best_val;
    if (record.improved) {
        state.best_val = record.val_mse;
        state.best = current;
        state.since_improvement = 0;
        log.best_epoch = record.epoch;
    } else {
        ++state.since_improvement;
    }
    log.epochs.push_back(record);
    if (record.constraint_violations > 0) {
        log.warnings.push_back("epoch " + std::to_string(record.epoch) + ": " +
                               std::to_string(record.constraint_violations) +
                               " generated windows broke the energy constraint");
    }
    spdlog::info("epoch {:3d}  train_mse {:.6f}  val_mse {:.6f}{}", record.epoch, record.train_mse, record.val_mse,
                 record.improved ? "  *" : "");
    if (state.since_improvement >= config.patience) {
        log.stopped_early = true;
        spdlog::info("early stop after epoch {} (best epoch {})", record.epoch, log.best_epoch);
        return true;
    }
    return false;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::stream(seed, "batch-order", static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);
    return order;
}

// Numeric failures inside a step (e.g. non-finite allocations) count as
// divergence and carry the parameters from before the step.
template <typename Fn>
decltype(auto) guarded(const ModelParams& last_good, int epoch, Fn&& fn) {
    try {
        return fn();
    } catch (const TrainingDivergedError&) {
        throw;
    } catch (const NumericError& e) {
        throw TrainingDivergedError(std::string(e.what()) + " in epoch " + std::to_string(epoch), last_good);
    }
}

}  // namespace

TrainResult train_cnn(std::span<const SrPair> train, std::span<const SrPair> validation,
                      const GeneratorConfig& generator_config, const TrainConfig& config) {
    validate(config);
    require_data(train, validation);

    ModelParams model;
    model.mode = "cnn";
    model.seed = config.seed;
    model.generator = Generator(generator_config);
    model.generator.initialize(config.seed);
    model.normalization = fit_normalization(train);
    model.data_digest = digest_windows(train, validation);

    nn::Adam adam(model.generator.parameter_count(), config.effective_generator_lr());
    TrainingLog log;
    LoopState state;
    state.best = model;
    std::vector<const SrPair*> batch;
    ModelParams before;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const auto order = epoch_order(train.size(), config.seed, epoch);
        EpochRecord record;
        record.epoch = epoch;
        double loss_sum = 0.0;
        for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
            batch.clear();
            for (std::size_t i = first; i < std::min(order.size(), first + config.batch_size); ++i) {
                batch.push_back(&train[order[i]]);
            }
            before = model;
            auto step = guarded(before, epoch, [&] { return content_gradient(model.generator, model.normalization, batch); });
            if (!std::isfinite(step.content_loss)) {
                throw TrainingDivergedError("non-finite content loss in epoch " + std::to_string(epoch), before);
            }
            loss_sum += step.content_loss * static_cast<double>(batch.size());
            record.constraint_violations += step.constraint_violations;
            adam.step(model.generator.parameters(), step.grad);
        }
        record.train_mse = loss_sum / static_cast<double>(train.size());
        record.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (guarded(before, epoch, [&] { return finish_epoch(record, model, validation, state, log, config); })) break;
    }
    return {std::move(state.best), std::move(log)};
}

TrainResult train_gan(std::span<const SrPair> train, std::span<const SrPair> validation,
                      const GeneratorConfig& generator_config, DiscriminatorConfig discriminator_config,
                      const TrainConfig& config) {
    validate(config);
    require_data(train, validation);
    discriminator_config.input_length = generator_config.window_length * generator_config.factor;

    ModelParams model;
    model.mode = "gan";
    model.seed = config.seed;
    model.generator = Generator(generator_config);
    model.generator.initialize(config.seed);
    model.discriminator.emplace(discriminator_config);
    model.discriminator->initialize(config.seed);
    model.normalization = fit_normalization(train);
    model.data_digest = digest_windows(train, validation);
    const int factor = generator_config.factor;

    nn::Adam gen_adam(model.generator.parameter_count(), config.effective_generator_lr());
    nn::Adam disc_adam(model.discriminator->parameter_count(), config.discriminator_lr);
    TrainingLog log;
    LoopState state;
    state.best = model;
    std::vector<const SrPair*> batch;
    Discriminator::Tape disc_tape;
    std::vector<double> disc_grad;
    ModelParams before;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const auto order = epoch_order(train.size(), config.seed, epoch);
        EpochRecord record;
        record.epoch = epoch;
        double content_sum = 0.0;
        double disc_sum = 0.0;
        double adv_sum = 0.0;
        bool collapsed = true;
        for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
            batch.clear();
            for (std::size_t i = first; i < std::min(order.size(), first + config.batch_size); ++i) {
                batch.push_back(&train[order[i]]);
            }
            before = model;
            const double per_window = 1.0 / static_cast<double>(batch.size());
            auto& disc = *model.discriminator;

            // Discriminator step: real windows labelled 1, generated windows 0.
            disc_grad.assign(disc.parameter_count(), 0.0);
            double disc_loss = 0.0;
            for (const auto* w : batch) {
                const auto fake =
                    guarded(before, epoch, [&] { return model.generator.forward(w->low.values, model.normalization); });
                const double real_logit = disc.forward(w->high.values, model.normalization, factor, disc_tape);
                disc_loss += nn::softplus(-real_logit) * per_window;
                disc.backward(disc_tape, -nn::sigmoid(-real_logit) * per_window, model.normalization, factor,
                              disc_grad, {});
                const double fake_logit = disc.forward(fake.high, model.normalization, factor, disc_tape);
                disc_loss += nn::softplus(fake_logit) * per_window;
                disc.backward(disc_tape, nn::sigmoid(fake_logit) * per_window, model.normalization, factor,
                              disc_grad, {});
            }
            if (!std::isfinite(disc_loss)) {
                throw TrainingDivergedError("non-finite discriminator loss in epoch " + std::to_string(epoch), before);
            }
            disc_adam.step(disc.parameters(), disc_grad);

            auto step = guarded(before, epoch, [&] {
                return adversarial_generator_gradient(model.generator, disc, model.normalization, batch,
                                                      config.adversarial_weight);
            });
            if (!std::isfinite(step.content_loss) || !std::isfinite(step.adversarial_loss)) {
                throw TrainingDivergedError("non-finite generator loss in epoch " + std::to_string(epoch), before);
            }
            record.constraint_violations += step.constraint_violations;
            gen_adam.step(model.generator.parameters(), step.grad);

            const auto weight = static_cast<double>(batch.size());
            content_sum += step.content_loss * weight;
            adv_sum += step.adversarial_loss * weight;
            disc_sum += disc_loss * weight;
            if (disc_loss >= 1e-6) collapsed = false;
        }
        const auto n = static_cast<double>(train.size());
        record.train_mse = content_sum / n;
        record.discriminator_loss = disc_sum / n;
        record.adversarial_loss = adv_sum / n;
        record.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (collapsed) {
            log.warnings.push_back("epoch " + std::to_string(epoch) + ": discriminator loss stayed below 1e-6");
            spdlog::warn("discriminator collapse in epoch {}", epoch);
        }
        spdlog::debug("epoch {:3d}  d_loss {:.5f}  adv {:.5f}", epoch, record.discriminator_loss,
                      record.adversarial_loss);
        if (guarded(before, epoch, [&] { return finish_epoch(record, model, validation, state, log, config); })) break;
    }
    return {std::move(state.best), std::move(log)};
}

IntervalSeries reconstruct_series(const ModelParams& model, const IntervalSeries& low) {
    const auto& cfg = model.generator.config();
    const auto window = static_cast<std::size_t>(cfg.window_length);
    const auto factor = static_cast<std::size_t>(cfg.factor);
    if (low.size() < window) {
        throw InsufficientLengthError("series '" + low.household_id + "' has " + std::to_string(low.size()) +
                                      " intervals but the model needs " + std::to_string(window) +
                                      "; use the piecewise-constant baseline instead");
    }
    if (low.interval_seconds % cfg.factor != 0) {
        throw InvalidFactorError("interval of " + std::to_string(low.interval_seconds) + " s is not divisible by " +
                                 std::to_string(cfg.factor));
    }
    IntervalSeries high{low.household_id, low.start_time, low.interval_seconds / cfg.factor, {}};
    high.values.resize(low.size() * factor);
    Generator::Tape tape;
    const std::span<const double> values = low.values;

    std::size_t covered = 0;
    for (; covered + window <= low.size(); covered += window) {
        const auto out = model.generator.forward(values.subspan(covered, window), model.normalization, tape);
        std::copy(out.high.begin(), out.high.end(), high.values.begin() + covered * factor);
    }
    if (covered < low.size()) {
        const std::size_t offset = low.size() - window;
        const auto out = model.generator.forward(values.subspan(offset, window), model.normalization, tape);
        const std::size_t skip = (covered - offset) * factor;
        std::copy(out.high.begin() + skip, out.high.end(), high.values.begin() + covered * factor);
    }
    return high;
}

}  // namespace srr
