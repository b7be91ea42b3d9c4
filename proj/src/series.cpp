#include "srr/series.hpp"

#include <algorithm>
#include <cmath>

#include "srr/errors.hpp"

namespace srr {

namespace {

void require_factor(int factor) {
    if (factor < 2) throw InvalidFactorError("upsampling factor must be >= 2, got " + std::to_string(factor));
}

}  // namespace

void validate(const IntervalSeries& series) {
    if (series.interval_seconds <= 0) throw ValidationError("interval_seconds must be positive");
    if (series.values.empty()) throw ValidationError("series '" + series.household_id + "' is empty");
    for (std::size_t i = 0; i < series.values.size(); ++i) {
        if (!std::isfinite(series.values[i])) {
            throw ValidationError("series '" + series.household_id + "' has a non-finite value at index " +
                                  std::to_string(i));
        }
    }
}

AllocationMatrix::AllocationMatrix(std::size_t rows, int factor)
    : values_(rows * static_cast<std::size_t>(factor), 0.0), factor_(factor) {}

AllocationMatrix::AllocationMatrix(std::vector<double> values, int factor) : values_(std::move(values)), factor_(factor) {
    if (factor <= 0 || values_.size() % factor != 0) {
        throw StructuralError("allocation values do not form rows of length " + std::to_string(factor));
    }
}

IntervalSeries downsample(const IntervalSeries& high, int factor) {
    require_factor(factor);
    if (high.values.empty() || high.values.size() % factor != 0) {
        throw StructuralError("series length " + std::to_string(high.values.size()) + " is not a multiple of factor " +
                              std::to_string(factor));
    }
    IntervalSeries low{high.household_id, high.start_time, high.interval_seconds * factor, {}};
    low.values.resize(high.values.size() / factor);
    for (std::size_t k = 0; k < low.values.size(); ++k) {
        double sum = 0.0;
        for (int j = 0; j < factor; ++j) sum += high.values[k * factor + j];
        low.values[k] = sum;
    }
    return low;
}

IntervalSeries baseline_upsample(const IntervalSeries& low, int factor) {
    require_factor(factor);
    if (low.interval_seconds % factor != 0) {
        throw InvalidFactorError("interval of " + std::to_string(low.interval_seconds) + " s is not divisible by " +
                                 std::to_string(factor));
    }
    IntervalSeries high{low.household_id, low.start_time, low.interval_seconds / factor, {}};
    high.values.reserve(low.values.size() * factor);
    for (double s : low.values) {
        const double share = s / factor;
        for (int j = 0; j < factor; ++j) high.values.push_back(share);
    }
    return high;
}

SrPair make_pair(IntervalSeries high, int factor) {
    IntervalSeries low = downsample(high, factor);
    return SrPair{std::move(low), std::move(high), factor};
}

ConstraintReport check_energy_constraint(std::span<const double> low, std::span<const double> high, int factor,
                                         double tolerance) {
    require_factor(factor);
    if (high.size() != low.size() * static_cast<std::size_t>(factor)) {
        throw StructuralError("high length " + std::to_string(high.size()) + " != factor * low length " +
                              std::to_string(low.size() * factor));
    }
    ConstraintReport report;
    report.residuals.resize(low.size());
    for (std::size_t k = 0; k < low.size(); ++k) {
        double sum = 0.0;
        for (int j = 0; j < factor; ++j) sum += high[k * factor + j];
        const double r = std::abs(low[k] - sum);
        report.residuals[k] = r;
        report.max_residual = std::max(report.max_residual, r);
        // Written so that a NaN residual fails.
        if (!(r <= tolerance * std::max(1.0, std::abs(low[k])))) report.passed = false;
    }
    return report;
}

ConstraintReport check_energy_constraint(const SrPair& pair, double tolerance) {
    if (pair.high.interval_seconds * pair.factor != pair.low.interval_seconds) {
        throw StructuralError("interval lengths of the pair are inconsistent with factor " +
                              std::to_string(pair.factor));
    }
    return check_energy_constraint(pair.low.values, pair.high.values, pair.factor, tolerance);
}

IntervalSeries reconstruct_from_allocations(const IntervalSeries& low, const AllocationMatrix& alloc) {
    const int factor = alloc.factor();
    require_factor(factor);
    if (alloc.rows() != low.values.size()) {
        throw StructuralError("allocation has " + std::to_string(alloc.rows()) + " rows for " +
                              std::to_string(low.values.size()) + " low intervals");
    }
    for (std::size_t k = 0; k < alloc.rows(); ++k) {
        double sum = 0.0;
        for (double a : alloc.row(k)) sum += a;
        if (!(std::abs(sum - 1.0) <= 1e-9)) {
            throw AllocationError("allocation row " + std::to_string(k) + " sums to " + std::to_string(sum));
        }
    }
    IntervalSeries high{low.household_id, low.start_time, low.interval_seconds / factor, {}};
    high.values.resize(low.values.size() * factor);
    for (std::size_t k = 0; k < low.values.size(); ++k) {
        for (int j = 0; j < factor; ++j) high.values[k * factor + j] = alloc(k, j) * low.values[k];
    }
    return high;
}

}  // namespace srr
