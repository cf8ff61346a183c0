#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "msde/frozen.hpp"
#include "msde/integrators.hpp"
#include "msde/model.hpp"
#include "msde/report.hpp"

namespace msde {

using AveragedFieldFn = std::function<void(std::span<const double> x, std::span<double> out)>;

/// Effective slow equation dXbar = fbar(Xbar) dt + sigmabar(Xbar) dW1.
struct AveragedModel {
    std::string id;
    std::string kind;  // analytic, gibbs-quadrature, table, hmm
    std::size_t d1 = 1;
    AveragedFieldFn f_bar;
    AveragedFieldFn sigma_bar;    // row-major d1 x d1
    AveragedFieldFn grad_f_bar;   // exact Jacobian, row-major; empty when unknown
    bool sigma_constant = true;
    /// Declared dissipativity rate: <fbar(x), x> <= -lambda1 |x|^2 + C.
    std::optional<double> lambda1;

    void validate() const;
};

[[nodiscard]] Vector eval_f_bar(const AveragedModel& avg, std::span<const double> x);
[[nodiscard]] Matrix eval_sigma_bar(const AveragedModel& avg, std::span<const double> x);

/// fbar(x) = -a1 x - x^3, sigmabar = 1.
[[nodiscard]] AveragedModel averaged_example_5_2(const Example52Params& p = {});
/// fbar(x) = x - x^3 + sin(x) m2(sin^2 x) where m2(s) is the second moment of
/// the frozen invariant density proportional to exp(-y^2 - y^4/2 - s y^6/3).
[[nodiscard]] AveragedModel averaged_example_5_1();
/// fbar(x) = -slow_rate x, sigmabar = sigma.
[[nodiscard]] AveragedModel averaged_linear_ou(const LinearOuParams& p = {});
/// Averaged model of a registered model at its default parameters.
[[nodiscard]] AveragedModel builtin_averaged(std::string_view id);

/// Second moment of the density proportional to exp(-y^2 - y^4/2 - s y^6/3),
/// interpolated from a precomputed table on s in [0, 1]; derivative included.
[[nodiscard]] double gibbs_m2(double s);
[[nodiscard]] double gibbs_m2_prime(double s);

struct TableSpec {
    double lo = -3.0;
    double hi = 3.0;
    std::size_t nodes = 61;
    FrozenSpec frozen;     // x is overwritten per node
    double T_avg = 200.0;  // time-averaging window for oscillating f
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

/// fbar and sigmabar tabulated on a uniform x grid (d1 = 1) from frozen
/// sampling, cubic-spline interpolated. Evaluation outside [lo, hi] raises
/// ContractViolation naming the excursion point.
class AveragedTable {
public:
    AveragedTable(const ModelSpec& model, const TableSpec& spec);

    [[nodiscard]] AveragedModel model() const;
    [[nodiscard]] const Vector& grid() const { return grid_; }
    [[nodiscard]] const Vector& f_values() const { return f_; }
    [[nodiscard]] const Vector& sigma_values() const { return s_; }
    /// Columns x,f_bar,sigma_bar.
    void write_csv(std::ostream& os) const;

private:
    struct Impl;
    std::string id_;
    std::optional<double> lambda1_;
    Vector grid_, f_, s_;
    std::shared_ptr<const Impl> impl_;
};

/// On-the-fly averaging: every evaluation of fbar samples the frozen measure
/// afresh (deterministically seeded by x). Expensive; d1 = 1 only for sigma.
[[nodiscard]] AveragedModel averaged_hmm(const ModelSpec& model, const FrozenSpec& frozen, double T_avg,
                                         std::uint64_t seed);

/// One-step driver of the averaged equation on a fixed grid, W1 increments
/// from the SlowW1 channel (shared with MultiscaleStepper for coupling).
class AveragedStepper {
public:
    AveragedStepper(const AveragedModel& avg, const IntegratorConfig& cfg, double dt, const NoisePath& noise);

    void reset(std::span<const double> x0);
    void step(std::size_t k);
    [[nodiscard]] std::span<const double> x() const noexcept { return x_; }

private:
    const AveragedModel* avg_;
    IntegratorConfig cfg_;
    double dt_;
    NoiseStream w1_;
    Vector x_, f_, s_, dw_, next_;
};

/// Tamed-Euler (or Euler) path of the averaged equation driven by the SlowW1
/// channel of `noise`, on the grid make_grid(horizon, cfg.dt).
[[nodiscard]] PathBundle simulate_averaged(const AveragedModel& avg, std::span<const double> x0, double horizon,
                                           const IntegratorConfig& cfg, const NoisePath& noise);

/// Macro step used for a coupled run at scale eps: min(dt_user, eps^{2 alpha}/10).
[[nodiscard]] double coupled_dt(const ModelSpec& model, const IntegratorConfig& cfg);

struct StrongErrorResult {
    double epsilon = 0.0;
    double error = 0.0;
    double se = 0.0;
    double dt = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_exploded = 0;
    bool flagged = false;  // explosion rate above 0.1 %
};

struct StrongErrorConfig {
    double horizon = 1.0;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

/// E sup_k |X^eps_{t_k} - Xbar_{t_k}|^2 with shared W1 increments.
[[nodiscard]] StrongErrorResult strong_error(const ModelSpec& model, const AveragedModel& avg,
                                             std::span<const double> x0, std::span<const double> y0,
                                             double epsilon, const IntegratorConfig& cfg,
                                             const StrongErrorConfig& run);

/// strong_error over a decreasing eps list, rows in input order, fitted when
/// at least three rows have positive error.
[[nodiscard]] ConvergenceReport strong_rate_sweep(const ModelSpec& model, const AveragedModel& avg,
                                                  std::span<const double> x0, std::span<const double> y0,
                                                  std::span<const double> eps_list, const IntegratorConfig& cfg,
                                                  const StrongErrorConfig& run);

/// sup_t E|X^eps_t - Xbar_t|^2 over the macro grid, with the SE at the argmax.
[[nodiscard]] StrongErrorResult sup_mean_square_gap(const ModelSpec& model, const AveragedModel& avg,
                                                    std::span<const double> x0, std::span<const double> y0,
                                                    double epsilon, const IntegratorConfig& cfg,
                                                    const StrongErrorConfig& run);

struct RegularityRow {
    double lag = 0.0;
    double mean_sq = 0.0;
    double se = 0.0;
    double ratio = 0.0;  // mean_sq / lag
};

/// E|X^eps_t - X^eps_s|^2 / |t - s| for dyadic lags horizon/2^k, averaged
/// over all grid pairs at that lag.
[[nodiscard]] std::vector<RegularityRow> time_regularity_probe(const ModelSpec& model, std::span<const double> x0,
                                                               std::span<const double> y0, std::size_t levels,
                                                               const IntegratorConfig& cfg,
                                                               const StrongErrorConfig& run);

}  // namespace msde
