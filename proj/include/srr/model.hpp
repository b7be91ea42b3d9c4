#pragma once

// Convolutional generator with a hard energy-constraint head, the
// discriminator used for adversarial training, and checkpoint files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "srr/nn.hpp"
#include "srr/series.hpp"

namespace srr {

struct GeneratorConfig {
    int factor = 4;
    /// Input window length T in low-resolution samples.
    int window_length = 24;
    int hidden_channels = 64;
    int residual_blocks = 4;
    int outer_kernel = 9;
    int block_kernel = 3;
};

struct DiscriminatorConfig {
    std::vector<int> channels{32, 64, 128};
    int kernel = 3;
    /// Input window length S*T in high-resolution samples.
    int input_length = 96;
};

void validate(const GeneratorConfig& config);
void validate(const DiscriminatorConfig& config);

/// Global standardization of low-resolution kWh values.
struct Normalization {
    double mean = 0.0;
    double stddev = 1.0;
};

/// Orthogonal projection of each row onto {a : sum(a) = 1}:
/// a_j = z_j - mean(z) + 1/S. Throws NumericError on non-finite input.
AllocationMatrix project_allocations(const AllocationMatrix& raw);

/// Vector-Jacobian product of the projection: dz_j = da_j - mean(da).
std::vector<double> project_allocations_backward(std::span<const double> dalloc, int factor);

struct GeneratorOutput {
    AllocationMatrix allocations;
    std::vector<double> high;
};

class Generator {
public:
    /// Intermediate activations kept for the backward pass.
    struct Tape {
        std::vector<double> input;          // normalized, [T]
        std::vector<double> low;            // kWh, [T]
        std::vector<double> stem_pre;       // [C][T]
        std::vector<double> stem;           // [C][T]
        std::vector<std::vector<double>> block_in;   // B+1 entries of [C][T]
        std::vector<std::vector<double>> block_pre;  // B entries of [C][T]
        std::vector<std::vector<double>> block_mid;  // B entries of [C][T]
        std::vector<double> trunk;          // stem + residual tower, [C][T]
    };

    Generator() = default;
    explicit Generator(GeneratorConfig config);

    const GeneratorConfig& config() const noexcept { return config_; }
    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    /// Deterministic initialization from a seed.
    void initialize(std::uint64_t seed);

    /// Zeroes the output layer: every allocation becomes 1/S, so the model
    /// reproduces the piecewise-constant baseline.
    void set_uniform_allocation();

    GeneratorOutput forward(std::span<const double> low_kwh, const Normalization& norm) const;
    GeneratorOutput forward(std::span<const double> low_kwh, const Normalization& norm, Tape& tape) const;

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(high).
    void backward(const Tape& tape, std::span<const double> dhigh, std::span<double> grad) const;

private:
    void build_layers();

    GeneratorConfig config_;
    nn::Conv1d stem_;
    std::vector<nn::Conv1d> block_convs_;  // two per residual block
    nn::Conv1d head_;
    std::vector<double> params_;
};

class Discriminator {
public:
    static constexpr double kLeakySlope = 0.2;

    struct Tape {
        std::vector<double> input;                  // normalized, [L]
        std::vector<std::vector<double>> pre;       // per conv layer
        std::vector<std::vector<double>> post;      // per conv layer
    };

    Discriminator() = default;
    explicit Discriminator(DiscriminatorConfig config);

    const DiscriminatorConfig& config() const noexcept { return config_; }
    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    void initialize(std::uint64_t seed);

    /// Realism logit of a high-resolution kWh window. Inputs are scaled to
    /// low-resolution units (times `factor`) and standardized with `norm`.
    double forward(std::span<const double> high_kwh, const Normalization& norm, int factor) const;
    double forward(std::span<const double> high_kwh, const Normalization& norm, int factor, Tape& tape) const;
    std::vector<double> forward_batch(std::span<const std::vector<double>> windows, const Normalization& norm,
                                      int factor) const;

    /// Accumulates parameter gradients into `grad` (if not empty) and input
    /// gradients w.r.t. the kWh window into `dhigh` (if not empty).
    void backward(const Tape& tape, double dlogit, const Normalization& norm, int factor, std::span<double> grad,
                  std::span<double> dhigh) const;

private:
    void build_layers();

    DiscriminatorConfig config_;
    std::vector<nn::Conv1d> convs_;
    std::vector<int> lengths_;  // input length of each conv, plus the final length
    nn::Dense dense_;
    std::vector<double> params_;
};

struct ModelParams {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::string mode = "cnn";  // cnn | gan | uniform
    Generator generator;
    std::optional<Discriminator> discriminator;
    Normalization normalization;
    std::uint64_t seed = 0;
    std::string data_digest;
};

nlohmann::ordered_json to_json(const GeneratorConfig& config);
nlohmann::ordered_json to_json(const DiscriminatorConfig& config);

/// Binary container: magic, format version, JSON header, little-endian
/// float64 parameters.
std::string serialize_checkpoint(const ModelParams& model);
ModelParams deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& model);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace srr
