#pragma once

// Minimal layers with hand-written backward passes. Every network keeps its
// parameters in one flat vector; layers only remember their offset into it.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "srr/random.hpp"

namespace srr::nn {

/// 1-D convolution over channel-major buffers ([channel][position]).
/// Parameters: weights [out][in][kernel] followed by bias [out].
struct Conv1d {
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
    std::size_t offset = 0;

    std::size_t weight_count() const {
        return static_cast<std::size_t>(in_channels) * out_channels * kernel;
    }
    std::size_t parameter_count() const { return weight_count() + out_channels; }
    int output_length(int length) const { return (length + 2 * padding - kernel) / stride + 1; }

    /// Uniform(-b, b) with b = scale / sqrt(fan_in), for weights and bias.
    void init(std::span<double> params, Rng& rng, double scale = 1.0) const;

    void forward(std::span<const double> params, std::span<const double> in, int length, std::span<double> out) const;

    /// Accumulates parameter gradients into `grad` and, when `din` is not
    /// empty, input gradients into `din`.
    void backward(std::span<const double> params, std::span<const double> in, int length,
                  std::span<const double> dout, std::span<double> grad, std::span<double> din) const;
};

/// Fully connected layer. Parameters: weights [out][in] then bias [out].
struct Dense {
    int inputs = 1;
    int outputs = 1;
    std::size_t offset = 0;

    std::size_t parameter_count() const { return static_cast<std::size_t>(inputs) * outputs + outputs; }
    void init(std::span<double> params, Rng& rng, double scale = 1.0) const;
    void forward(std::span<const double> params, std::span<const double> in, std::span<double> out) const;
    void backward(std::span<const double> params, std::span<const double> in, std::span<const double> dout,
                  std::span<double> grad, std::span<double> din) const;
};

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double leaky_relu_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

class Adam {
public:
    Adam() = default;
    Adam(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad);
    long steps() const { return t_; }

private:
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

}  // namespace srr::nn
