#include "srr/nn.hpp"

#include <algorithm>

namespace srr::nn {

namespace {

// Range of output positions l for which l*stride + tap - padding lies in [0, length).
struct TapRange {
    int begin;
    int end;
};

TapRange tap_range(int tap, int padding, int stride, int length, int out_length) {
    const int shift = tap - padding;
    int begin = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
    int end = (length - 1 - shift) >= 0 ? (length - 1 - shift) / stride + 1 : 0;
    begin = std::min(begin, out_length);
    end = std::clamp(end, begin, out_length);
    return {begin, end};
}

}  // namespace

void Conv1d::init(std::span<double> params, Rng& rng, double scale) const {
    const double bound = scale / std::sqrt(static_cast<double>(in_channels * kernel));
    auto p = params.subspan(offset, parameter_count());
    for (auto& w : p) w = rng.uniform(-bound, bound);
}

void Conv1d::forward(std::span<const double> params, std::span<const double> in, int length,
                     std::span<double> out) const {
    const int out_length = output_length(length);
    const double* weights = params.data() + offset;
    const double* bias = weights + weight_count();
    for (int o = 0; o < out_channels; ++o) {
        double* dst = out.data() + static_cast<std::size_t>(o) * out_length;
        std::fill(dst, dst + out_length, bias[o]);
        for (int i = 0; i < in_channels; ++i) {
            const double* src = in.data() + static_cast<std::size_t>(i) * length;
            const double* w = weights + (static_cast<std::size_t>(o) * in_channels + i) * kernel;
            for (int t = 0; t < kernel; ++t) {
                const auto [begin, end] = tap_range(t, padding, stride, length, out_length);
                const double wt = w[t];
                const int shift = t - padding;
                if (stride == 1) {
                    const double* s = src + shift;
                    for (int l = begin; l < end; ++l) dst[l] += wt * s[l];
                } else {
                    for (int l = begin; l < end; ++l) dst[l] += wt * src[l * stride + shift];
                }
            }
        }
    }
}

void Conv1d::backward(std::span<const double> params, std::span<const double> in, int length,
                      std::span<const double> dout, std::span<double> grad, std::span<double> din) const {
    const int out_length = output_length(length);
    const double* weights = params.data() + offset;
    double* gw = grad.data() + offset;
    double* gb = gw + weight_count();
    const bool want_input = !din.empty();
    for (int o = 0; o < out_channels; ++o) {
        const double* g = dout.data() + static_cast<std::size_t>(o) * out_length;
        double bias_sum = 0.0;
        for (int l = 0; l < out_length; ++l) bias_sum += g[l];
        gb[o] += bias_sum;
        for (int i = 0; i < in_channels; ++i) {
            const double* src = in.data() + static_cast<std::size_t>(i) * length;
            double* dsrc = want_input ? din.data() + static_cast<std::size_t>(i) * length : nullptr;
            const std::size_t w_index = (static_cast<std::size_t>(o) * in_channels + i) * kernel;
            for (int t = 0; t < kernel; ++t) {
                const auto [begin, end] = tap_range(t, padding, stride, length, out_length);
                const int shift = t - padding;
                const double wt = weights[w_index + t];
                double acc = 0.0;
                if (stride == 1) {
                    const double* s = src + shift;
                    for (int l = begin; l < end; ++l) acc += g[l] * s[l];
                    if (want_input) {
                        double* ds = dsrc + shift;
                        for (int l = begin; l < end; ++l) ds[l] += wt * g[l];
                    }
                } else {
                    for (int l = begin; l < end; ++l) acc += g[l] * src[l * stride + shift];
                    if (want_input) {
                        for (int l = begin; l < end; ++l) dsrc[l * stride + shift] += wt * g[l];
                    }
                }
                gw[w_index + t] += acc;
            }
        }
    }
}

void Dense::init(std::span<double> params, Rng& rng, double scale) const {
    const double bound = scale / std::sqrt(static_cast<double>(inputs));
    for (auto& w : params.subspan(offset, parameter_count())) w = rng.uniform(-bound, bound);
}

void Dense::forward(std::span<const double> params, std::span<const double> in, std::span<double> out) const {
    const double* weights = params.data() + offset;
    const double* bias = weights + static_cast<std::size_t>(inputs) * outputs;
    for (int o = 0; o < outputs; ++o) {
        const double* w = weights + static_cast<std::size_t>(o) * inputs;
        double acc = bias[o];
        for (int i = 0; i < inputs; ++i) acc += w[i] * in[i];
        out[o] = acc;
    }
}

void Dense::backward(std::span<const double> params, std::span<const double> in, std::span<const double> dout,
                     std::span<double> grad, std::span<double> din) const {
    const double* weights = params.data() + offset;
    double* gw = grad.data() + offset;
    double* gb = gw + static_cast<std::size_t>(inputs) * outputs;
    for (int o = 0; o < outputs; ++o) {
        const double g = dout[o];
        double* row = gw + static_cast<std::size_t>(o) * inputs;
        for (int i = 0; i < inputs; ++i) row[i] += g * in[i];
        gb[o] += g;
        if (!din.empty()) {
            const double* w = weights + static_cast<std::size_t>(o) * inputs;
            for (int i = 0; i < inputs; ++i) din[i] += g * w[i];
        }
    }
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

}  // namespace srr::nn
