#include "srr/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "srr/errors.hpp"
#include "srr/random.hpp"

namespace srr {

void validate(const GeneratorConfig& c) {
    if (c.factor < 2) throw InvalidFactorError("generator factor must be >= 2");
    if (c.window_length < 1) throw ValidationError("generator window_length must be >= 1");
    if (c.hidden_channels < 1) throw ValidationError("generator hidden_channels must be >= 1");
    if (c.residual_blocks < 0) throw ValidationError("generator residual_blocks must be >= 0");
    if (c.outer_kernel < 1 || c.outer_kernel % 2 == 0 || c.block_kernel < 1 || c.block_kernel % 2 == 0) {
        throw ValidationError("generator kernel sizes must be odd");
    }
}

void validate(const DiscriminatorConfig& c) {
    if (c.channels.empty()) throw ValidationError("discriminator needs at least one conv layer");
    for (int ch : c.channels)
        if (ch < 1) throw ValidationError("discriminator channel widths must be >= 1");
    if (c.kernel < 1 || c.kernel % 2 == 0) throw ValidationError("discriminator kernel size must be odd");
    if (c.input_length < 1) throw ValidationError("discriminator input_length must be >= 1");
}

AllocationMatrix project_allocations(const AllocationMatrix& raw) {
    const int factor = raw.factor();
    AllocationMatrix out(raw.rows(), factor);
    for (std::size_t k = 0; k < raw.rows(); ++k) {
        const auto z = raw.row(k);
        double mean = 0.0;
        for (double v : z) {
            if (!std::isfinite(v)) throw NumericError("non-finite raw allocation in row " + std::to_string(k));
            mean += v;
        }
        mean /= factor;
        auto a = out.row(k);
        for (int j = 0; j < factor; ++j) a[j] = z[j] - mean + 1.0 / factor;
    }
    return out;
}

std::vector<double> project_allocations_backward(std::span<const double> dalloc, int factor) {
    if (factor < 1 || dalloc.size() % factor != 0) throw StructuralError("gradient does not form allocation rows");
    std::vector<double> dz(dalloc.size());
    for (std::size_t k = 0; k < dalloc.size() / factor; ++k) {
        double mean = 0.0;
        for (int j = 0; j < factor; ++j) mean += dalloc[k * factor + j];
        mean /= factor;
        for (int j = 0; j < factor; ++j) dz[k * factor + j] = dalloc[k * factor + j] - mean;
    }
    return dz;
}

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(GeneratorConfig config) : config_(std::move(config)) {
    validate(config_);
    build_layers();
}

void Generator::build_layers() {
    const int c = config_.hidden_channels;
    std::size_t offset = 0;
    auto make = [&](int in, int out, int kernel) {
        nn::Conv1d conv{in, out, kernel, 1, kernel / 2, offset};
        offset += conv.parameter_count();
        return conv;
    };
    stem_ = make(1, c, config_.outer_kernel);
    block_convs_.clear();
    for (int b = 0; b < 2 * config_.residual_blocks; ++b) block_convs_.push_back(make(c, c, config_.block_kernel));
    head_ = make(c, config_.factor, config_.outer_kernel);
    params_.assign(offset, 0.0);
}

void Generator::initialize(std::uint64_t seed) {
    Rng rng = Rng::stream(seed, "generator-init");
    stem_.init(params_, rng);
    for (const auto& conv : block_convs_) conv.init(params_, rng);
    // A small head keeps the initial allocations close to uniform.
    head_.init(params_, rng, 0.1);
}

void Generator::set_uniform_allocation() {
    std::fill(params_.begin() + head_.offset, params_.begin() + head_.offset + head_.parameter_count(), 0.0);
}

GeneratorOutput Generator::forward(std::span<const double> low_kwh, const Normalization& norm) const {
    Tape tape;
    return forward(low_kwh, norm, tape);
}

GeneratorOutput Generator::forward(std::span<const double> low_kwh, const Normalization& norm, Tape& tape) const {
    const int length = config_.window_length;
    const int channels = config_.hidden_channels;
    const int factor = config_.factor;
    if (params_.empty()) throw StructuralError("generator has not been configured");
    if (low_kwh.size() != static_cast<std::size_t>(length)) {
        throw StructuralError("generator expects a window of " + std::to_string(length) + " samples, got " +
                              std::to_string(low_kwh.size()));
    }
    const std::size_t plane = static_cast<std::size_t>(channels) * length;

    tape.low.assign(low_kwh.begin(), low_kwh.end());
    tape.input.resize(length);
    for (int k = 0; k < length; ++k) tape.input[k] = (low_kwh[k] - norm.mean) / norm.stddev;

    tape.stem_pre.assign(plane, 0.0);
    stem_.forward(params_, tape.input, length, tape.stem_pre);
    tape.stem.resize(plane);
    std::transform(tape.stem_pre.begin(), tape.stem_pre.end(), tape.stem.begin(), nn::silu);

    const int blocks = config_.residual_blocks;
    tape.block_in.resize(blocks + 1);
    tape.block_pre.resize(blocks);
    tape.block_mid.resize(blocks);
    tape.block_in[0] = tape.stem;
    std::vector<double> update(plane);
    for (int b = 0; b < blocks; ++b) {
        auto& pre = tape.block_pre[b];
        auto& mid = tape.block_mid[b];
        pre.assign(plane, 0.0);
        block_convs_[2 * b].forward(params_, tape.block_in[b], length, pre);
        mid.resize(plane);
        std::transform(pre.begin(), pre.end(), mid.begin(), nn::silu);
        block_convs_[2 * b + 1].forward(params_, mid, length, update);
        auto& next = tape.block_in[b + 1];
        next.resize(plane);
        for (std::size_t i = 0; i < plane; ++i) next[i] = tape.block_in[b][i] + update[i];
    }
    tape.trunk.resize(plane);
    for (std::size_t i = 0; i < plane; ++i) tape.trunk[i] = tape.stem[i] + tape.block_in[blocks][i];

    std::vector<double> head_out(static_cast<std::size_t>(factor) * length);
    head_.forward(params_, tape.trunk, length, head_out);

    AllocationMatrix raw(static_cast<std::size_t>(length), factor);
    for (int k = 0; k < length; ++k) {
        auto row = raw.row(k);
        for (int j = 0; j < factor; ++j) row[j] = head_out[static_cast<std::size_t>(j) * length + k];
    }
    GeneratorOutput out{project_allocations(raw), {}};
    out.high.resize(static_cast<std::size_t>(factor) * length);
    for (int k = 0; k < length; ++k) {
        for (int j = 0; j < factor; ++j) out.high[k * factor + j] = out.allocations(k, j) * low_kwh[k];
    }
    return out;
}

void Generator::backward(const Tape& tape, std::span<const double> dhigh, std::span<double> grad) const {
    const int length = config_.window_length;
    const int channels = config_.hidden_channels;
    const int factor = config_.factor;
    const std::size_t plane = static_cast<std::size_t>(channels) * length;
    if (dhigh.size() != static_cast<std::size_t>(factor) * length || grad.size() != params_.size()) {
        throw StructuralError("generator backward: gradient shapes do not match");
    }

    std::vector<double> dalloc(dhigh.size());
    for (int k = 0; k < length; ++k) {
        for (int j = 0; j < factor; ++j) dalloc[k * factor + j] = dhigh[k * factor + j] * tape.low[k];
    }
    const auto dz = project_allocations_backward(dalloc, factor);
    std::vector<double> dhead(dz.size());
    for (int k = 0; k < length; ++k) {
        for (int j = 0; j < factor; ++j) dhead[static_cast<std::size_t>(j) * length + k] = dz[k * factor + j];
    }

    std::vector<double> dtrunk(plane, 0.0);
    head_.backward(params_, tape.trunk, length, dhead, grad, dtrunk);

    std::vector<double> dr = dtrunk;
    std::vector<double> dmid(plane);
    for (int b = config_.residual_blocks - 1; b >= 0; --b) {
        std::fill(dmid.begin(), dmid.end(), 0.0);
        block_convs_[2 * b + 1].backward(params_, tape.block_mid[b], length, dr, grad, dmid);
        const auto& pre = tape.block_pre[b];
        for (std::size_t i = 0; i < plane; ++i) dmid[i] *= nn::silu_grad(pre[i]);
        // dr already holds the skip-path gradient; the conv adds its share.
        block_convs_[2 * b].backward(params_, tape.block_in[b], length, dmid, grad, dr);
    }

    std::vector<double> dstem(plane);
    for (std::size_t i = 0; i < plane; ++i) dstem[i] = (dtrunk[i] + dr[i]) * nn::silu_grad(tape.stem_pre[i]);
    stem_.backward(params_, tape.input, length, dstem, grad, {});
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(DiscriminatorConfig config) : config_(std::move(config)) {
    validate(config_);
    build_layers();
}

void Discriminator::build_layers() {
    std::size_t offset = 0;
    convs_.clear();
    lengths_.assign(1, config_.input_length);
    int in = 1;
    for (int out : config_.channels) {
        nn::Conv1d conv{in, out, config_.kernel, 2, config_.kernel / 2, offset};
        offset += conv.parameter_count();
        lengths_.push_back(conv.output_length(lengths_.back()));
        if (lengths_.back() < 1) throw ValidationError("discriminator input is too short for its strided layers");
        convs_.push_back(conv);
        in = out;
    }
    dense_ = nn::Dense{config_.channels.back() * lengths_.back(), 1, offset};
    offset += dense_.parameter_count();
    params_.assign(offset, 0.0);
}

void Discriminator::initialize(std::uint64_t seed) {
    Rng rng = Rng::stream(seed, "discriminator-init");
    for (const auto& conv : convs_) conv.init(params_, rng);
    dense_.init(params_, rng);
}

double Discriminator::forward(std::span<const double> high_kwh, const Normalization& norm, int factor) const {
    Tape tape;
    return forward(high_kwh, norm, factor, tape);
}

double Discriminator::forward(std::span<const double> high_kwh, const Normalization& norm, int factor,
                              Tape& tape) const {
    if (params_.empty()) throw StructuralError("discriminator has not been configured");
    if (high_kwh.size() != static_cast<std::size_t>(config_.input_length)) {
        throw StructuralError("discriminator expects " + std::to_string(config_.input_length) + " samples, got " +
                              std::to_string(high_kwh.size()));
    }
    tape.input.resize(high_kwh.size());
    for (std::size_t i = 0; i < high_kwh.size(); ++i) {
        tape.input[i] = (factor * high_kwh[i] - norm.mean) / norm.stddev;
    }
    tape.pre.resize(convs_.size());
    tape.post.resize(convs_.size());
    const std::vector<double>* x = &tape.input;
    for (std::size_t l = 0; l < convs_.size(); ++l) {
        const std::size_t n = static_cast<std::size_t>(convs_[l].out_channels) * lengths_[l + 1];
        tape.pre[l].assign(n, 0.0);
        convs_[l].forward(params_, *x, lengths_[l], tape.pre[l]);
        tape.post[l].resize(n);
        for (std::size_t i = 0; i < n; ++i) tape.post[l][i] = nn::leaky_relu(tape.pre[l][i], kLeakySlope);
        x = &tape.post[l];
    }
    double logit = 0.0;
    dense_.forward(params_, *x, std::span<double>(&logit, 1));
    return logit;
}

std::vector<double> Discriminator::forward_batch(std::span<const std::vector<double>> windows,
                                                 const Normalization& norm, int factor) const {
    std::vector<double> logits;
    logits.reserve(windows.size());
    Tape tape;
    for (const auto& w : windows) logits.push_back(forward(w, norm, factor, tape));
    return logits;
}

void Discriminator::backward(const Tape& tape, double dlogit, const Normalization& norm, int factor,
                             std::span<double> grad, std::span<double> dhigh) const {
    std::vector<double> scratch;
    if (grad.empty()) {
        scratch.assign(params_.size(), 0.0);
        grad = scratch;
    }
    if (grad.size() != params_.size()) throw StructuralError("discriminator backward: gradient size mismatch");

    std::vector<double> dpost(tape.post.back().size(), 0.0);
    dense_.backward(params_, tape.post.back(), std::span<const double>(&dlogit, 1), grad, dpost);
    for (std::size_t l = convs_.size(); l-- > 0;) {
        for (std::size_t i = 0; i < dpost.size(); ++i) dpost[i] *= nn::leaky_relu_grad(tape.pre[l][i], kLeakySlope);
        const auto& in = l == 0 ? tape.input : tape.post[l - 1];
        std::vector<double> din(in.size(), 0.0);
        convs_[l].backward(params_, in, lengths_[l], dpost, grad, din);
        dpost = std::move(din);
    }
    if (!dhigh.empty()) {
        if (dhigh.size() != dpost.size()) throw StructuralError("discriminator backward: input gradient size mismatch");
        const double scale = factor / norm.stddev;
        for (std::size_t i = 0; i < dpost.size(); ++i) dhigh[i] += dpost[i] * scale;
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::ordered_json to_json(const GeneratorConfig& c) {
    return {{"factor", c.factor},
            {"window_length", c.window_length},
            {"hidden_channels", c.hidden_channels},
            {"residual_blocks", c.residual_blocks},
            {"outer_kernel", c.outer_kernel},
            {"block_kernel", c.block_kernel}};
}

nlohmann::ordered_json to_json(const DiscriminatorConfig& c) {
    return {{"channels", c.channels}, {"kernel", c.kernel}, {"input_length", c.input_length}};
}

namespace {

constexpr char kMagic[8] = {'S', 'R', 'R', 'C', 'K', 'P', 'T', '\n'};

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos, int bytes = 8) {
    if (pos + bytes > in.size()) throw CheckpointError("checkpoint is truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += bytes;
    return v;
}

void put_doubles(std::string& out, std::span<const double> values) {
    for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void get_doubles(const std::string& in, std::size_t& pos, std::span<double> values) {
    for (auto& v : values) v = std::bit_cast<double>(get_u64(in, pos));
}

GeneratorConfig generator_config_from(const nlohmann::json& j) {
    GeneratorConfig c;
    c.factor = j.at("factor").get<int>();
    c.window_length = j.at("window_length").get<int>();
    c.hidden_channels = j.at("hidden_channels").get<int>();
    c.residual_blocks = j.at("residual_blocks").get<int>();
    c.outer_kernel = j.at("outer_kernel").get<int>();
    c.block_kernel = j.at("block_kernel").get<int>();
    return c;
}

DiscriminatorConfig discriminator_config_from(const nlohmann::json& j) {
    DiscriminatorConfig c;
    c.channels = j.at("channels").get<std::vector<int>>();
    c.kernel = j.at("kernel").get<int>();
    c.input_length = j.at("input_length").get<int>();
    return c;
}

}  // namespace

std::string serialize_checkpoint(const ModelParams& model) {
    nlohmann::ordered_json header;
    header["format_version"] = ModelParams::kFormatVersion;
    header["mode"] = model.mode;
    header["seed"] = model.seed;
    header["data_digest"] = model.data_digest;
    header["normalization"] = {{"mean", model.normalization.mean}, {"stddev", model.normalization.stddev}};
    auto gen = to_json(model.generator.config());
    gen["parameters"] = model.generator.parameter_count();
    header["generator"] = gen;
    if (model.discriminator) {
        auto disc = to_json(model.discriminator->config());
        disc["parameters"] = model.discriminator->parameter_count();
        header["discriminator"] = disc;
    } else {
        header["discriminator"] = nullptr;
    }
    const std::string text = header.dump();

    std::string out(kMagic, sizeof kMagic);
    put_u64(out, ModelParams::kFormatVersion);
    put_u64(out, text.size());
    out += text;
    put_doubles(out, model.generator.parameters());
    if (model.discriminator) put_doubles(out, model.discriminator->parameters());
    return out;
}

ModelParams deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof kMagic || bytes.compare(0, sizeof kMagic, kMagic, sizeof kMagic) != 0) {
        throw CheckpointError("not a checkpoint file (bad magic)");
    }
    std::size_t pos = sizeof kMagic;
    const auto version = get_u64(bytes, pos);
    if (version != ModelParams::kFormatVersion) {
        throw CheckpointError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(ModelParams::kFormatVersion) + ")");
    }
    const auto header_size = get_u64(bytes, pos);
    if (pos + header_size > bytes.size()) throw CheckpointError("checkpoint is truncated");
    ModelParams model;
    try {
        const auto header = nlohmann::json::parse(bytes.substr(pos, header_size));
        pos += header_size;
        if (header.at("format_version").get<std::uint64_t>() != ModelParams::kFormatVersion) {
            throw CheckpointError("checkpoint header version does not match its container");
        }
        model.mode = header.at("mode").get<std::string>();
        model.seed = header.at("seed").get<std::uint64_t>();
        model.data_digest = header.at("data_digest").get<std::string>();
        model.normalization.mean = header.at("normalization").at("mean").get<double>();
        model.normalization.stddev = header.at("normalization").at("stddev").get<double>();

        model.generator = Generator(generator_config_from(header.at("generator")));
        if (header.at("generator").at("parameters").get<std::size_t>() != model.generator.parameter_count()) {
            throw CheckpointError("generator parameter count does not match its configuration");
        }
        get_doubles(bytes, pos, model.generator.parameters());
        if (!header.at("discriminator").is_null()) {
            model.discriminator.emplace(discriminator_config_from(header.at("discriminator")));
            if (header.at("discriminator").at("parameters").get<std::size_t>() !=
                model.discriminator->parameter_count()) {
                throw CheckpointError("discriminator parameter count does not match its configuration");
            }
            get_doubles(bytes, pos, model.discriminator->parameters());
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
    } catch (const ValidationError& e) {
        throw CheckpointError(std::string("checkpoint carries an invalid configuration: ") + e.what());
    }
    if (pos != bytes.size()) throw CheckpointError("checkpoint has trailing bytes");
    if (!(model.normalization.stddev > 0.0)) throw CheckpointError("checkpoint normalization is invalid");
    return model;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
    const auto bytes = serialize_checkpoint(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("writing checkpoint '" + path.string() + "' failed");
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return deserialize_checkpoint(buf.str());
    } catch (const CheckpointError& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
}

}  // namespace srr
