#pragma once

// Interval energy series, conservative resampling and the piecewise-constant
// baseline. Everything here operates on index-aligned sequences; timestamps
// are carried along as metadata only.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "srr/time.hpp"

namespace srr {

/// Regularly sampled per-interval energy values in kWh. Values may be
/// negative (net export).
struct IntervalSeries {
    std::string household_id;
    Timestamp start_time{};
    int interval_seconds = 900;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    Timestamp time_at(std::size_t index) const {
        return start_time + std::chrono::seconds{static_cast<long long>(index) * interval_seconds};
    }
};

/// Throws ValidationError unless interval_seconds > 0, values is non-empty and
/// every value is finite.
void validate(const IntervalSeries& series);

/// Aligned low/high resolution views of the same consumption.
struct SrPair {
    IntervalSeries low;
    IntervalSeries high;
    int factor = 4;
};

/// Per-low-interval allocation factors, row-major with `factor` columns.
class AllocationMatrix {
public:
    AllocationMatrix() = default;
    AllocationMatrix(std::size_t rows, int factor);
    AllocationMatrix(std::vector<double> values, int factor);

    std::size_t rows() const noexcept { return factor_ > 0 ? values_.size() / factor_ : 0; }
    int factor() const noexcept { return factor_; }

    std::span<double> row(std::size_t k) { return {values_.data() + k * factor_, static_cast<std::size_t>(factor_)}; }
    std::span<const double> row(std::size_t k) const {
        return {values_.data() + k * factor_, static_cast<std::size_t>(factor_)};
    }
    double operator()(std::size_t k, int j) const { return values_[k * factor_ + j]; }

    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::vector<double> values_;
    int factor_ = 0;
};

IntervalSeries downsample(const IntervalSeries& high, int factor);

IntervalSeries baseline_upsample(const IntervalSeries& low, int factor);

/// Pairs `high` with its exact downsampled counterpart.
SrPair make_pair(IntervalSeries high, int factor);

struct ConstraintReport {
    std::vector<double> residuals;
    double max_residual = 0.0;
    bool passed = true;
};

/// residual_k = |low_k - sum of group k of high|; passes iff every residual is
/// within tolerance * max(1, |low_k|). Shape problems raise StructuralError.
ConstraintReport check_energy_constraint(std::span<const double> low, std::span<const double> high, int factor,
                                         double tolerance);
ConstraintReport check_energy_constraint(const SrPair& pair, double tolerance);

/// high[kS + j] = alloc(k, j) * low[k]. Rows must sum to one within 1e-9.
IntervalSeries reconstruct_from_allocations(const IntervalSeries& low, const AllocationMatrix& alloc);

}  // namespace srr
