#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "msde/model.hpp"
#include "msde/noise.hpp"
#include "msde/report.hpp"

namespace msde {

enum class Scheme { EulerMaruyama, TamedEuler, SemiImplicitFast };

[[nodiscard]] Scheme parse_scheme(const std::string& name);
[[nodiscard]] std::string to_string(Scheme s);

struct IntegratorConfig {
    /// SemiImplicitFast: tamed Euler for the slow equation, drift-implicit in
    /// the linear part and tamed in the remainder for the fast one.
    Scheme scheme = Scheme::SemiImplicitFast;
    double dt = 1e-3;                 // macro step
    std::size_t fast_substeps = 10;   // micro steps per macro step
    double taming_exponent = 1.0;     // taming denominator 1 + dt^p |drift|
    double resolution_safety = 0.1;   // micro step must be <= safety * eps^(2 alpha)
    std::size_t record_stride = 1;    // PathBundle keeps every k-th macro state

    void validate() const;
};

/// state + dt * drift / (1 + dt^p |drift|) + diffusion * dW, where diffusion
/// is row-major state.size() x dW.size(). Non-finite drift or diffusion raises
/// NumericOverflow carrying `step`.
void step_tamed_into(std::span<const double> drift, std::span<const double> diffusion,
                     std::span<const double> state, double dt, std::span<const double> dW,
                     double taming_exponent, std::span<double> out, std::size_t step = 0);

[[nodiscard]] Vector step_tamed(std::span<const double> drift, std::span<const double> diffusion,
                                std::span<const double> state, double dt, std::span<const double> dW,
                                const IntegratorConfig& cfg);

/// Plain Euler-Maruyama counterpart of step_tamed_into.
void step_euler_into(std::span<const double> drift, std::span<const double> diffusion,
                     std::span<const double> state, double dt, std::span<const double> dW,
                     std::span<double> out, std::size_t step = 0);

/// Discrete trajectory of one realization.
struct PathBundle {
    std::string model_id;
    double epsilon = 1.0;
    std::uint64_t seed = 0;
    std::size_t d1 = 0;
    std::size_t d2 = 0;
    Vector t;
    Vector x;  // t.size() * d1, row-major by time
    Vector y;  // t.size() * d2 (empty for averaged or deviation paths)

    [[nodiscard]] std::size_t size() const { return t.size(); }
    [[nodiscard]] std::span<const double> x_at(std::size_t k) const { return {x.data() + k * d1, d1}; }
    [[nodiscard]] std::span<const double> y_at(std::size_t k) const { return {y.data() + k * d2, d2}; }

    /// First line "# model=<id>,epsilon=<eps>,seed=<seed>", then the header
    /// t,x_1..x_d1,y_1..y_d2 and one row per grid point.
    void write_csv(std::ostream& os) const;
};

/// Number of macro steps and the effective step for a horizon: the smallest
/// n with horizon / n <= dt.
struct TimeGrid {
    std::size_t steps = 0;
    double dt = 0.0;
};
[[nodiscard]] TimeGrid make_grid(double horizon, double dt);

/// Fast-equation stepper with the slow variable frozen:
///   dY = (drift_scale B(x,Y) + b_scale b(x,Y)) dt + noise_scale g(x,Y) dW.
/// Used for the fast half of the multi-scale system (scales eps^-2alpha,
/// eps^-beta, eps^-alpha) and for the frozen equation (1, 0, 1).
class FastStepper {
public:
    FastStepper(const ModelSpec& model, Scheme scheme, double h, double taming_exponent, double drift_scale,
                double b_scale, double noise_scale);

    /// Freezes x and recomputes the linear rate of the implicit part.
    void freeze(std::span<const double> x);
    /// One micro step using normals (step_index, 0..d2-1) of `noise`; the
    /// antithetic flag negates the increments.
    void step(std::span<double> y, const NoiseStream& noise, std::uint64_t step_index, bool antithetic = false);

    [[nodiscard]] double h() const noexcept { return h_; }
    [[nodiscard]] std::span<const double> linear_rate() const noexcept { return rate_; }

private:
    void drift(std::span<const double> y, std::span<double> out);

    const ModelSpec* model_;
    Scheme scheme_;
    double h_;
    double taming_exponent_;
    double drift_scale_;
    double b_scale_;
    double noise_scale_;
    Vector x_;
    Vector rate_;
    Vector work_drift_, work_b_, work_g_, work_dw_, work_next_, work_probe_;
};

/// Coupled slow-fast stepper. Each macro step advances Y by fast_substeps
/// micro steps with X frozen, then advances X once with the end-of-step Y and
/// f, sigma evaluated at time eps^-gamma t_k.
class MultiscaleStepper {
public:
    MultiscaleStepper(const ModelSpec& model, const IntegratorConfig& cfg, double dt, const NoisePath& noise);

    void reset(std::span<const double> x0, std::span<const double> y0);
    /// Advances from t_k = k dt to t_{k+1}. Throws NumericOverflow.
    void step(std::size_t k);

    [[nodiscard]] std::span<const double> x() const noexcept { return x_; }
    [[nodiscard]] std::span<const double> y() const noexcept { return y_; }

private:
    const ModelSpec* model_;
    IntegratorConfig cfg_;
    double dt_;
    double time_scale_;
    FastStepper fast_;
    NoiseStream w1_, w2_;
    Vector x_, y_, f_, sig_, dw_, next_;
};

/// Checks micro step <= safety * eps^(2 alpha); throws ContractViolation
/// naming the largest admissible macro step otherwise.
void check_fast_resolution(const ModelSpec& model, const IntegratorConfig& cfg, double dt);

/// Trajectory of (X^eps, Y^eps) on the macro grid.
[[nodiscard]] PathBundle integrate_multiscale(const ModelSpec& model, const State& initial, double horizon,
                                              const IntegratorConfig& cfg, const NoisePath& noise);

/// Scalar autonomous SDE dX = drift(X) dt + diffusion(X) dW for scheme
/// self-tests.
struct ScalarSdeCase {
    std::string name;
    std::function<double(double)> drift;
    std::function<double(double)> diffusion;
    double x0 = 1.0;
    double horizon = 1.0;
};

/// dX = sin(X) dt + 0.5 X dW, X0 = 1: bounded drift, multiplicative noise.
[[nodiscard]] ScalarSdeCase bounded_drift_case();
/// dX = (-X - X^3) dt, X0 = 1.
[[nodiscard]] ScalarSdeCase deterministic_case();

/// Root-mean-square terminal error of the configured scheme against a
/// reference computed on a grid 8 times finer than the smallest dt, with the
/// coarse Brownian increments obtained by exact summation of the reference
/// increments. dt_list must be strictly decreasing, of length >= 3, and each
/// entry an integer multiple of the reference step.
[[nodiscard]] ConvergenceReport strong_order_probe(const ScalarSdeCase& c, std::span<const double> dt_list,
                                                   std::size_t n_paths, const IntegratorConfig& cfg,
                                                   std::uint64_t seed);

}  // namespace msde
