#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "msde/integrators.hpp"
#include "msde/model.hpp"
#include "msde/noise.hpp"

namespace msde {

/// Weighted point cloud in R^dim. Points are stored row-major.
struct EmpiricalMeasure {
    std::size_t dim = 0;
    Vector points;
    Vector weights;

    [[nodiscard]] std::size_t size() const { return weights.size(); }
    [[nodiscard]] bool empty() const { return weights.empty(); }
    [[nodiscard]] std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }

    /// Weights sum to 1 within 1e-12, are nonnegative, points are finite.
    void validate() const;

    [[nodiscard]] static EmpiricalMeasure uniform(std::size_t dim, Vector points);
    [[nodiscard]] static EmpiricalMeasure dirac(std::span<const double> at);

    /// Columns z_1..z_dim,weight.
    void write_csv(std::ostream& os) const;
};

/// Frozen fast equation dY = B(x,Y) dt + g(x,Y) dW at fixed x. The b term is
/// excluded unless include_b is set (sensitivity studies only).
struct FrozenSpec {
    Vector x;
    bool include_b = false;
    std::optional<double> burn_in;        // default 5/eta; must be >= 5/eta
    std::optional<double> sample_stride;  // default 2/eta
    std::size_t n_samples = 1000;
    double dt = 1e-3;
    Scheme scheme = Scheme::SemiImplicitFast;
    Vector y0;  // empty: start at the origin

    [[nodiscard]] double resolved_burn_in(const ModelSpec& model) const;
    [[nodiscard]] double resolved_stride(const ModelSpec& model) const;
};

/// One long frozen trajectory from y0, burn-in discarded, sampled every
/// stride. Uses the Frozen channel of `noise`.
[[nodiscard]] EmpiricalMeasure sample_invariant(const ModelSpec& model, const FrozenSpec& spec,
                                                const NoisePath& noise);

/// sum_i w_i |z_i|^m for even m >= 2.
[[nodiscard]] double moment(const EmpiricalMeasure& mu, int m);

/// sum_i w_i f(t, x, y_i).
[[nodiscard]] Vector averaged_drift_hat(const ModelSpec& model, double t, std::span<const double> x,
                                        const EmpiricalMeasure& mu_x);

struct TimeAverageInfo {
    std::size_t nodes = 0;
    double richardson_gap = 0.0;  // max |trapezoid(h) - trapezoid(2h)|
};

/// (1/T) int_0^T fhat(s, x) ds by the composite trapezoid rule with at least
/// 20 nodes per period of the fastest declared forcing frequency.
[[nodiscard]] Vector averaged_drift_bar(const ModelSpec& model, std::span<const double> x, double T_avg,
                                        const EmpiricalMeasure& mu_x, TimeAverageInfo* info = nullptr);

/// Entrywise time average of sigma(s, x) on [0, T_avg], row-major d1 x d1.
[[nodiscard]] Matrix averaged_diffusion_bar(const ModelSpec& model, std::span<const double> x, double T_avg,
                                            TimeAverageInfo* info = nullptr);

struct PoissonEstimate {
    Vector value;
    Vector se;
    double T_cut = 0.0;
    /// Relative size of the neglected tail, e^{-eta T_cut / 2}.
    double tail_factor = 0.0;
    std::size_t n_paths = 0;
};

struct PoissonConfig {
    std::optional<double> T_cut;  // default 15/eta; must be >= 10/eta
    std::size_t n_paths = 1000;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    double t = 0.0;  // time argument of f
    unsigned threads = 0;
};

/// Monte-Carlo estimate of u(x, y) = int_0^T_cut E[f(x, Y_t^x(y)) - fbar(x)] dt,
/// the probabilistic solution of L2 u = -(f - fbar).
[[nodiscard]] PoissonEstimate poisson_solution_estimate(const ModelSpec& model, std::span<const double> x,
                                                        std::span<const double> y,
                                                        std::span<const double> f_bar_x,
                                                        const PoissonConfig& cfg);

struct ContractionRow {
    double t = 0.0;
    double mean_sq = 0.0;
    double se = 0.0;
    double envelope = 0.0;  // |y1 - y2|^2 e^{-eta t}
    bool pass = false;      // mean_sq <= envelope + 3 se
};

/// Coupled frozen trajectories from y1 and y2 driven by the same noise.
[[nodiscard]] std::vector<ContractionRow> contraction_probe(const ModelSpec& model, std::span<const double> x,
                                                            std::span<const double> y1,
                                                            std::span<const double> y2,
                                                            std::span<const double> times, std::size_t n_pairs,
                                                            double dt, std::uint64_t seed, unsigned threads = 0);

struct ContinuityRow {
    double delta = 0.0;
    double mean_sq = 0.0;
    double se = 0.0;
    double ratio = 0.0;  // mean_sq / delta^2
};

/// E|Y_t^{x} - Y_t^{x + delta e_1}|^2 with shared noise, both from y = 0.
[[nodiscard]] std::vector<ContinuityRow> parameter_continuity_probe(const ModelSpec& model,
                                                                    std::span<const double> x,
                                                                    std::span<const double> deltas, double t,
                                                                    std::size_t n_paths, double dt,
                                                                    std::uint64_t seed, unsigned threads = 0);

}  // namespace msde
