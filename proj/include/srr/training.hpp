#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "srr/errors.hpp"
#include "srr/model.hpp"
#include "srr/series.hpp"

namespace srr {

enum class TrainMode { cnn, gan };

TrainMode parse_train_mode(const std::string& text);
std::string to_string(TrainMode mode);

struct TrainConfig {
    TrainMode mode = TrainMode::cnn;
    int epochs = 20;
    int batch_size = 32;
    /// Unset means 1e-3 for cnn and 1e-4 for gan.
    std::optional<double> generator_lr;
    double discriminator_lr = 1e-4;
    double adversarial_weight = 1e-3;
    int window_hours = 24;
    int stride_hours = 12;
    std::uint64_t seed = 2020;
    int patience = 5;

    double effective_generator_lr() const { return generator_lr.value_or(mode == TrainMode::cnn ? 1e-3 : 1e-4); }
};

void validate(const TrainConfig& config);
nlohmann::ordered_json to_json(const TrainConfig& config);

struct EpochRecord {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
    /// Adversarial runs only.
    double discriminator_loss = 0.0;
    double adversarial_loss = 0.0;
    double wall_seconds = 0.0;
    /// Generated training windows that broke the energy constraint at 1e-6.
    std::size_t constraint_violations = 0;
    bool improved = false;
};

struct TrainingLog {
    std::vector<EpochRecord> epochs;
    std::vector<std::string> warnings;
    int best_epoch = 0;
    bool stopped_early = false;

    /// One JSON object per epoch, as written to the JSON-lines log.
    std::vector<nlohmann::ordered_json> json_lines(TrainMode mode) const;
};

struct TrainResult {
    ModelParams model;
    TrainingLog log;
};

/// Loss diverged. Carries the last parameters that produced finite losses.
class TrainingDivergedError : public NumericError {
public:
    TrainingDivergedError(const std::string& what, std::optional<ModelParams> last_good)
        : NumericError(what), last_good_(std::move(last_good)) {}

    const std::optional<ModelParams>& last_good() const noexcept { return last_good_; }

private:
    std::optional<ModelParams> last_good_;
};

/// Mean and standard deviation of every low-resolution value in `windows`.
Normalization fit_normalization(std::span<const SrPair> windows);

/// Content loss and its gradient for one batch: MSE in kWh between generated
/// and true high-resolution windows, averaged over every sample of the batch.
struct BatchGradient {
    std::vector<double> grad;
    double content_loss = 0.0;
    double adversarial_loss = 0.0;
    std::size_t constraint_violations = 0;
};

BatchGradient content_gradient(const Generator& generator, const Normalization& norm,
                               std::span<const SrPair* const> batch);

/// Generator step of adversarial training: content loss plus
/// adversarial_weight times the non-saturating loss -log sigmoid(D(G(x))).
BatchGradient adversarial_generator_gradient(const Generator& generator, const Discriminator& discriminator,
                                             const Normalization& norm, std::span<const SrPair* const> batch,
                                             double adversarial_weight);

/// Mean MSE (kWh^2) of the generator over `windows`, pooled per sample.
double window_mse(const Generator& generator, const Normalization& norm, std::span<const SrPair> windows);

TrainResult train_cnn(std::span<const SrPair> train, std::span<const SrPair> validation,
                      const GeneratorConfig& generator_config, const TrainConfig& config);

TrainResult train_gan(std::span<const SrPair> train, std::span<const SrPair> validation,
                      const GeneratorConfig& generator_config, DiscriminatorConfig discriminator_config,
                      const TrainConfig& config);

/// Full-series inference: non-overlapping windows from the start, plus one
/// end-aligned window whose allocations fill only the uncovered tail.
IntervalSeries reconstruct_series(const ModelParams& model, const IntervalSeries& low);

}  // namespace srr
