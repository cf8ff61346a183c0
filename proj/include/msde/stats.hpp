#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace msde::stats {

/// Pairwise (cascade) summation. The result depends only on the order of the
/// input, so reductions over per-path slots are independent of scheduling.
[[nodiscard]] double pairwise_sum(std::span<const double> v);

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};

/// Sample mean and standard error of independent observations.
[[nodiscard]] MeanSe mean_se(std::span<const double> v);

/// Mean with a batch-means standard error for serially correlated samples
/// (single long trajectories). Uses `batches` contiguous blocks.
[[nodiscard]] MeanSe batch_means(std::span<const double> v, std::size_t batches = 32);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope * x with a two-sided 95%
/// Student-t interval on the slope. Needs at least three points.
[[nodiscard]] LineFit least_squares(std::span<const double> x, std::span<const double> y);

/// Two-sided Student-t quantile, e.g. student_t_quantile(0.975, dof).
[[nodiscard]] double student_t_quantile(double p, double dof);

}  // namespace msde::stats
