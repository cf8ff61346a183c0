#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "msde/averaging.hpp"
#include "msde/frozen.hpp"
#include "msde/integrators.hpp"
#include "msde/model.hpp"

namespace msde {

/// Pointwise (X^eps - Xbar) / sqrt(eps). Bundles must share the time grid.
[[nodiscard]] PathBundle deviation_path(const PathBundle& x_eps, const PathBundle& x_bar, double epsilon);

enum class GMethod { Autocovariance, PoissonRep };
[[nodiscard]] std::string to_string(GMethod m);

struct GConfig {
    std::optional<double> T_cut;  // default 15/eta; must be >= 10/eta
    std::size_t n_draws = 10000;
    double dt = 0.01;
    std::uint64_t seed = 1;
    bool antithetic = true;        // autocovariance: average each draw over a +/- noise pair
    std::size_t inner_paths = 8;   // poisson-rep: paths per draw for u(x, y)
    double t = 0.0;                // time argument of f
    unsigned threads = 0;
};

struct GEstimate {
    Vector x;
    GMethod method = GMethod::Autocovariance;
    Matrix gg_t;   // symmetrized estimate of the printed double integral
    Matrix se;     // entrywise standard errors
    Matrix g;      // symmetric square root of gg_t after clipping
    double T_cut = 0.0;
    std::size_t n_draws = 0;
    double clipped_mass = 0.0;  // sum of |clipped negative eigenvalues|
    bool clipped = false;
    /// PoissonRep only: the same integral with psi solving L2 psi = f - fbar,
    /// i.e. the negated value.
    std::optional<Matrix> opposite_sign;
    std::vector<std::string> notes;

    /// Columns row,col,gg_t,se.
    void write_csv(std::ostream& os) const;
    [[nodiscard]] std::string sidecar_json(std::uint64_t seed) const;
};

/// int_0^T_cut int E[(f(x, Y_t^x(y)) - fbar)(f(x, y) - fbar)^T] mu_x(dy) dt,
/// with y drawn from mu_x and Y_t^x(y) the frozen flow.
[[nodiscard]] GEstimate estimate_G(const ModelSpec& model, std::span<const double> x,
                                   std::span<const double> f_bar_x, const EmpiricalMeasure& mu_x,
                                   const GConfig& cfg);

/// int (f - fbar) u^T dmu_x with u the probabilistic Poisson solution
/// (L2 u = -(f - fbar)), estimated with cfg.inner_paths paths per draw.
[[nodiscard]] GEstimate estimate_G_poisson(const ModelSpec& model, std::span<const double> x,
                                           std::span<const double> f_bar_x, const EmpiricalMeasure& mu_x,
                                           const GConfig& cfg);

/// Symmetric PSD square root. Negative eigenvalues no larger in magnitude
/// than clip_threshold are set to 0 and reported; larger ones raise
/// NumericError.
[[nodiscard]] Matrix psd_sqrt(const Matrix& a, double clip_threshold, double* clipped_mass = nullptr);

/// Diffusion matrix of the deviation limit built from a GEstimate.
/// GreenKubo uses the covariance 2 sym(gg_t), which reproduces the law of
/// Z^eps on the linear oracle; OneSided uses gg_t itself.
enum class LimitConvention { GreenKubo, OneSided };
[[nodiscard]] Matrix limit_diffusion(const GEstimate& g, LimitConvention c = LimitConvention::GreenKubo);

struct GradientCheck {
    Matrix value;                 // exact when available, otherwise FD
    Matrix finite_difference;
    std::optional<double> max_abs_diff;  // |exact - FD| when exact exists
};

[[nodiscard]] double default_fd_step(std::span<const double> x);

/// Central-difference Jacobian of fbar; h below 1e3 * machine eps * |x| is
/// refused.
[[nodiscard]] GradientCheck grad_f_bar(const AveragedModel& avg, std::span<const double> x, double h);

using MatrixField = std::function<Matrix(std::span<const double> x)>;

/// Constant matrix field.
[[nodiscard]] MatrixField constant_field(const Matrix& m);
/// G(x) tabulated on a uniform 1d grid, linearly interpolated and clamped to
/// the end nodes.
[[nodiscard]] MatrixField tabulated_field(Vector grid, std::vector<Matrix> values);
/// Jacobian of fbar, exact when available, otherwise central differences.
[[nodiscard]] MatrixField gradient_field(const AveragedModel& avg);

/// Euler path of dZbar = grad fbar(Xbar) Zbar dt + G(Xbar) dW~ with Zbar_0 = 0
/// along a tamed-Euler Xbar. Xbar uses the SlowW1 channel of `noise`; W~ uses
/// the LimitW1 channel of stream `limit_stream`, which must differ from
/// noise.stream_id. The bundle stores Xbar in x and Zbar in y.
[[nodiscard]] PathBundle simulate_limit(const AveragedModel& avg, const MatrixField& G, const MatrixField& grad,
                                        std::span<const double> x0, double horizon, const IntegratorConfig& cfg,
                                        const NoisePath& noise, std::uint64_t limit_stream);

struct TestFunction {
    std::string tag;
    std::function<double(std::span<const double>)> phi;
};

/// tanh(v_k . z) for three seeded directions scaled 0.5, 1, 2;
/// exp(-|z|^2 / 2); sin(v_1 . z). All bounded with bounded derivatives.
[[nodiscard]] std::vector<TestFunction> default_test_functions(std::size_t d1, std::uint64_t seed = 1);

/// Deviation samples at fixed grid times, stored [time][path][coord].
struct SampleSet {
    std::size_t d1 = 1;
    std::size_t n_paths = 0;
    Vector times;
    Vector values;

    [[nodiscard]] std::span<const double> at(std::size_t time, std::size_t path) const {
        return {values.data() + (time * n_paths + path) * d1, d1};
    }
};

struct DeviationRow {
    double t = 0.0;
    std::string tag;
    double e_eps = 0.0;
    double e_bar = 0.0;
    double se = 0.0;  // combined standard error of the difference
};

struct DeviationReport {
    double epsilon = 0.0;
    std::vector<std::string> test_functions;
    std::vector<DeviationRow> rows;
    std::vector<double> sup_gap;     // per test function
    std::vector<double> sup_gap_se;  // SE at the maximizing time
    double overall_gap = 0.0;        // max over test functions
    double overall_se = 0.0;
    std::vector<std::string> warnings;

    /// Columns t,phi,e_eps,e_bar,gap,se.
    void write_csv(std::ostream& os) const;
    [[nodiscard]] std::string sidecar_json(std::uint64_t seed) const;
};

/// sup over grid times of |E phi(Z^eps_t) - E phi(Zbar_t)| per test function.
/// Both sets need >= 500 paths and identical time grids.
[[nodiscard]] DeviationReport weak_gap(const SampleSet& z_eps, const SampleSet& z_bar,
                                       const std::vector<TestFunction>& phis, double epsilon);

struct DeviationRun {
    Vector times;          // sample times in (0, horizon]
    std::size_t n_paths = 5000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    bool allow_nonconstant_sigma = false;
};

/// Z^eps samples from coupled multiscale/averaged runs at scale eps.
[[nodiscard]] SampleSet sample_deviation(const ModelSpec& model, const AveragedModel& avg,
                                         std::span<const double> x0, std::span<const double> y0, double epsilon,
                                         const IntegratorConfig& cfg, const DeviationRun& run);

/// Zbar samples of the limit equation on the same time grid.
[[nodiscard]] SampleSet sample_limit(const AveragedModel& avg, const MatrixField& G, const MatrixField& grad,
                                     std::span<const double> x0, const IntegratorConfig& cfg,
                                     const DeviationRun& run);

}  // namespace msde
