#include "srr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <sstream>

#include "srr/errors.hpp"

namespace srr {

void validate(const MetricConfig& config) {
    if (config.window_hours < 1 || config.samples_per_hour < 1) {
        throw ValidationError("metric window must be at least one sample");
    }
    if (config.stride_samples < 1) throw ValidationError("metric stride must be >= 1");
}

double mse(std::span<const double> reference, std::span<const double> reconstruction) {
    if (reference.size() != reconstruction.size()) {
        throw StructuralError("mse: lengths differ (" + std::to_string(reference.size()) + " vs " +
                              std::to_string(reconstruction.size()) + ")");
    }
    if (reference.empty()) throw StructuralError("mse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = reference[i] - reconstruction[i];
        sum += d * d;
    }
    return sum / static_cast<double>(reference.size());
}

std::vector<double> sliding_max(std::span<const double> values, std::size_t width, std::size_t stride) {
    if (width == 0 || stride == 0) throw ValidationError("sliding_max: width and stride must be positive");
    if (values.size() < width) {
        throw InsufficientLengthError("series of " + std::to_string(values.size()) + " samples is shorter than a " +
                                      std::to_string(width) + "-sample window");
    }
    std::vector<double> maxima;
    maxima.reserve((values.size() - width) / stride + 1);
    // Indices with strictly decreasing values; the front is the current max.
    std::deque<std::size_t> candidates;
    for (std::size_t i = 0; i < values.size(); ++i) {
        while (!candidates.empty() && values[candidates.back()] <= values[i]) candidates.pop_back();
        candidates.push_back(i);
        if (candidates.front() + width <= i) candidates.pop_front();
        if (i + 1 >= width) {
            const std::size_t start = i + 1 - width;
            if (start % stride == 0) maxima.push_back(values[candidates.front()]);
        }
    }
    return maxima;
}

std::vector<double> window_peak_errors(std::span<const double> reference, std::span<const double> reconstruction,
                                       const MetricConfig& config) {
    validate(config);
    if (reference.size() != reconstruction.size()) {
        throw StructuralError("wpe: lengths differ (" + std::to_string(reference.size()) + " vs " +
                              std::to_string(reconstruction.size()) + ")");
    }
    const auto width = static_cast<std::size_t>(config.window_samples());
    const auto stride = static_cast<std::size_t>(config.stride_samples);
    const auto ref_max = sliding_max(reference, width, stride);
    const auto rec_max = sliding_max(reconstruction, width, stride);
    std::vector<double> errors(ref_max.size());
    for (std::size_t w = 0; w < errors.size(); ++w) errors[w] = std::abs(ref_max[w] - rec_max[w]);
    return errors;
}

double wpe(std::span<const double> reference, std::span<const double> reconstruction, const MetricConfig& config) {
    const auto errors = window_peak_errors(reference, reconstruction, config);
    double sum = 0.0;
    for (double e : errors) sum += e;
    return sum / static_cast<double>(errors.size());
}

const WpeResult* MethodResult::wpe_at(int window_hours) const {
    for (const auto& w : wpe)
        if (w.window_hours == window_hours) return &w;
    return nullptr;
}

const MethodResult* GroupResult::method(const std::string& name) const {
    for (const auto& m : methods)
        if (m.method == name) return &m;
    return nullptr;
}

const GroupResult* EvalReport::group(const std::string& name) const {
    if (name == pooled.group) return &pooled;
    for (const auto& g : groups)
        if (g.group == name) return &g;
    return nullptr;
}

namespace {

struct Accumulator {
    double squared_error = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_series = 0;
    std::size_t violations = 0;
    std::vector<double> window_error;
    std::vector<std::size_t> n_windows;

    explicit Accumulator(std::size_t n_configs) : window_error(n_configs, 0.0), n_windows(n_configs, 0) {}

    MethodResult finish(const std::string& method, std::span<const MetricConfig> configs) const {
        MethodResult r;
        r.method = method;
        r.mse = squared_error / static_cast<double>(n_samples);
        r.n_samples = n_samples;
        r.n_series = n_series;
        r.constraint_violations = violations;
        for (std::size_t c = 0; c < configs.size(); ++c) {
            r.wpe.push_back({configs[c].window_hours, window_error[c] / static_cast<double>(n_windows[c]),
                             n_windows[c]});
        }
        return r;
    }
};

}  // namespace

EvalReport evaluate(std::span<const EvalCase> cases, const std::string& method, std::span<const MetricConfig> configs) {
    if (cases.empty()) throw EmptyDataError("evaluate: no series to score");
    if (configs.empty()) throw ValidationError("evaluate: at least one metric config is required");
    for (const auto& c : configs) {
        validate(c);
        if (c.samples_per_hour != configs.front().samples_per_hour ||
            c.stride_samples != configs.front().stride_samples) {
            throw ValidationError("evaluate: configs must share samples_per_hour and stride");
        }
    }

    Accumulator pooled(configs.size());
    std::map<std::string, Accumulator> groups;
    for (const auto& c : cases) {
        if (c.pair == nullptr || c.reconstruction == nullptr) throw StructuralError("evaluate: null case");
        const auto& truth = c.pair->high.values;
        const auto& rec = c.reconstruction->values;
        if (truth.size() != rec.size()) {
            throw StructuralError("evaluate: reconstruction of '" + c.pair->high.household_id + "' has " +
                                  std::to_string(rec.size()) + " samples, expected " + std::to_string(truth.size()));
        }
        auto& group = groups.try_emplace(c.group, configs.size()).first->second;
        const bool violated = !check_energy_constraint(c.pair->low.values, rec, c.pair->factor, 1e-6).passed;

        for (Accumulator* acc : {&group, &pooled}) {
            for (std::size_t i = 0; i < truth.size(); ++i) {
                const double d = truth[i] - rec[i];
                acc->squared_error += d * d;
            }
            acc->n_samples += truth.size();
            acc->n_series += 1;
            acc->violations += violated ? 1 : 0;
        }
        for (std::size_t k = 0; k < configs.size(); ++k) {
            const auto errors = window_peak_errors(truth, rec, configs[k]);
            for (Accumulator* acc : {&group, &pooled}) {
                for (double e : errors) acc->window_error[k] += e;
                acc->n_windows[k] += errors.size();
            }
        }
    }

    EvalReport report;
    report.samples_per_hour = configs.front().samples_per_hour;
    report.stride_samples = configs.front().stride_samples;
    for (const auto& c : configs) report.window_hours.push_back(c.window_hours);
    for (const auto& [label, acc] : groups) report.groups.push_back({label, {acc.finish(method, configs)}});
    report.pooled.methods.push_back(pooled.finish(method, configs));
    return report;
}

void merge(EvalReport& into, const EvalReport& other) {
    if (into.window_hours != other.window_hours || into.samples_per_hour != other.samples_per_hour ||
        into.stride_samples != other.stride_samples || into.groups.size() != other.groups.size()) {
        throw StructuralError("merge: reports were computed with different settings or groups");
    }
    for (std::size_t g = 0; g < into.groups.size(); ++g) {
        if (into.groups[g].group != other.groups[g].group) throw StructuralError("merge: group labels differ");
        auto& dst = into.groups[g].methods;
        dst.insert(dst.end(), other.groups[g].methods.begin(), other.groups[g].methods.end());
    }
    auto& dst = into.pooled.methods;
    dst.insert(dst.end(), other.pooled.methods.begin(), other.pooled.methods.end());
}

namespace {

nlohmann::ordered_json group_json(const GroupResult& g) {
    nlohmann::ordered_json methods = nlohmann::ordered_json::array();
    for (const auto& m : g.methods) {
        nlohmann::ordered_json wpe = nlohmann::ordered_json::array();
        for (const auto& w : m.wpe) {
            wpe.push_back({{"window_hours", w.window_hours}, {"mean_wpe", w.mean_wpe}, {"n_windows", w.n_windows}});
        }
        methods.push_back({{"method", m.method},
                           {"mse", m.mse},
                           {"n_samples", m.n_samples},
                           {"n_series", m.n_series},
                           {"constraint_violations", m.constraint_violations},
                           {"wpe", wpe}});
    }
    return {{"group", g.group}, {"methods", methods}};
}

}  // namespace

nlohmann::ordered_json to_json(const EvalReport& report) {
    nlohmann::ordered_json doc;
    doc["report_version"] = EvalReport::kVersion;
    doc["config"] = {{"samples_per_hour", report.samples_per_hour},
                     {"stride_samples", report.stride_samples},
                     {"window_hours", report.window_hours}};
    doc["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : report.groups) doc["groups"].push_back(group_json(g));
    doc["pooled"] = group_json(report.pooled);
    doc["metadata"] = report.metadata;
    return doc;
}

std::string format_table(const EvalReport& report, int window_hours) {
    std::vector<const GroupResult*> columns;
    for (const auto& g : report.groups) columns.push_back(&g);
    columns.push_back(&report.pooled);

    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-12s", "");
    out << buf;
    for (const auto* g : columns) {
        std::snprintf(buf, sizeof buf, " | %-21s", g->group.c_str());
        out << buf;
    }
    out << "\n";
    std::snprintf(buf, sizeof buf, "%-12s", "method");
    out << buf;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        std::snprintf(buf, sizeof buf, " | %-10s %-10s", "MSE", "mean WPE");
        out << buf;
    }
    out << "\n";

    std::vector<std::string> methods;
    for (const auto& m : report.pooled.methods) methods.push_back(m.method);
    for (const auto& name : methods) {
        std::snprintf(buf, sizeof buf, "%-12s", name.c_str());
        out << buf;
        for (const auto* g : columns) {
            const auto* m = g->method(name);
            const auto* w = m ? m->wpe_at(window_hours) : nullptr;
            if (m && w) {
                std::snprintf(buf, sizeof buf, " | %-10.4f %-10.4f", m->mse, w->mean_wpe);
            } else {
                std::snprintf(buf, sizeof buf, " | %-10s %-10s", "-", "-");
            }
            out << buf;
        }
        out << "\n";
    }
    out << "(mean WPE at W = " << window_hours << " h)\n";
    return out.str();
}

}  // namespace srr
