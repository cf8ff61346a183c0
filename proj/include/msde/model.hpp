#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msde/core.hpp"

namespace msde {

/// Scale exponents of the slow-fast system
///   dX = f(eps^-gamma t, X, Y) dt + sigma(eps^-gamma t, X) dW1
///   dY = (eps^-2alpha B(X,Y) + eps^-beta b(X,Y)) dt + eps^-alpha g(X,Y) dW2.
struct ScaleExponents {
    double alpha = 0.5;
    double beta = 0.0;
    double gamma = 0.5;
    double epsilon = 1.0;

    /// Throws ContractViolation unless 0 <= beta < 2 alpha, 0 < gamma < 2 alpha
    /// and epsilon in (0, 1].
    void validate() const;

    [[nodiscard]] double fast_drift_scale() const;     // eps^-2alpha
    [[nodiscard]] double intermediate_scale() const;   // eps^-beta
    [[nodiscard]] double fast_noise_scale() const;     // eps^-alpha
    [[nodiscard]] double time_scale() const;           // eps^-gamma
    [[nodiscard]] double fast_time() const;            // eps^2alpha
};

/// User-declared structural constants (eta, theta, lambda1, K1..K8, ...).
/// Constants are never inferred; probes only try to falsify them.
class AssumptionMeta {
public:
    /// Symbols accepted in configuration files.
    static const std::set<std::string, std::less<>>& known_symbols();
    static const std::set<std::string, std::less<>>& known_flags();

    void set(std::string_view name, double value);
    void set_flag(std::string_view name, bool on = true);

    [[nodiscard]] std::optional<double> get(std::string_view name) const;
    /// Returns the constant or throws ConfigError naming the absent symbol.
    [[nodiscard]] double require(std::string_view name) const;
    [[nodiscard]] bool has(std::string_view name) const { return get(name).has_value(); }
    [[nodiscard]] bool flag(std::string_view name) const;

    [[nodiscard]] const std::map<std::string, double, std::less<>>& constants() const { return constants_; }
    [[nodiscard]] const std::set<std::string, std::less<>>& flags() const { return flags_; }

    /// Finite constants, eta > 0, theta >= 2.
    void validate() const;

private:
    std::map<std::string, double, std::less<>> constants_;
    std::set<std::string, std::less<>> flags_;
};

using SlowDriftFn = std::function<void(double t, std::span<const double> x, std::span<const double> y,
                                       std::span<double> out)>;
/// out is the row-major d1 x d1 matrix sigma(t, x).
using SlowDiffusionFn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
using FastFieldFn = std::function<void(std::span<const double> x, std::span<const double> y,
                                       std::span<double> out)>;
/// out is the row-major d2 x d2 matrix g(x, y).
using FastDiffusionFn = std::function<void(std::span<const double> x, std::span<const double> y,
                                           std::span<double> out)>;

/// Structural properties the experiments gate on.
struct ModelTraits {
    bool time_independent = true;        // f and sigma ignore t
    bool sigma_constant = true;          // sigma independent of (t, x)
    bool fast_independent_of_x = false;  // B(x,y) = B(y), g(x,y) = g(y)
    bool has_b = false;                  // intermediate drift present
};

/// Immutable coefficient bundle of a multi-scale model. Safe to share across
/// threads; all evaluation functions are reentrant.
struct ModelSpec {
    std::string id;
    std::size_t d1 = 1;
    std::size_t d2 = 1;
    SlowDriftFn f;
    SlowDiffusionFn sigma;
    FastFieldFn B;
    FastFieldFn b;  // empty when has_b is false
    FastDiffusionFn g;
    ScaleExponents scales;
    AssumptionMeta meta;
    /// Angular frequencies of the time dependence of f and sigma in their own
    /// time argument (before the eps^-gamma rescaling).
    std::vector<double> forcing_frequencies;
    ModelTraits traits;
    std::vector<std::string> warnings;

    void validate() const;
    [[nodiscard]] ModelSpec with_epsilon(double epsilon) const;
};

struct State {
    double t = 0.0;
    Vector x;
    Vector y;
};

[[nodiscard]] Vector eval_slow_drift(const ModelSpec& m, double t, std::span<const double> x,
                                     std::span<const double> y);
[[nodiscard]] Matrix eval_slow_diffusion(const ModelSpec& m, double t, std::span<const double> x);
[[nodiscard]] Vector eval_fast_drift(const ModelSpec& m, std::span<const double> x, std::span<const double> y);
[[nodiscard]] Vector eval_intermediate_drift(const ModelSpec& m, std::span<const double> x,
                                             std::span<const double> y);
[[nodiscard]] Matrix eval_fast_diffusion(const ModelSpec& m, std::span<const double> x,
                                         std::span<const double> y);

// Built-in models ----------------------------------------------------------

/// Periodically forced Van der Pol oscillator after the Lienard
/// transformation, with eps = 1/mu^2:
///   dx/dtau = a sin(2 pi nu tau / sqrt(eps)) - y,  dy/dtau = (x - y^3/3 + y)/eps.
/// Rejects mu <= 1; adds a warning when eps > 0.25.
[[nodiscard]] ModelSpec vanderpol_to_system(double mu, double a, double nu);

/// f = x - x^3 + y^2 sin x + y, sigma = 1, B = -(sin x)^2 y^5 - y^3 - y, g = 1,
/// alpha = 1/2.
[[nodiscard]] ModelSpec example_5_1(double epsilon = 0.01);

struct Example52Params {
    double a1 = 1.0;
    double a2 = 1.0;
    double a3 = 0.0;
    double a4 = 0.0;
};

/// f = -a1 x - x^3 + (a2 y + a3 y^3)(cos t + sin(sqrt2 t)) - a4 x y^4 sin^2 t,
/// B = -y^3 - y, b = x + y, g = 1, alpha = gamma = 1/2, beta = 1/3.
[[nodiscard]] ModelSpec example_5_2(const Example52Params& p = {}, double epsilon = 0.01);

struct LinearOuParams {
    double slow_rate = 0.0;   // f = -slow_rate x + y
    double sigma = 0.0;       // constant slow diffusion
    double fast_rate = 1.0;   // B = -fast_rate y
    double g = 1.4142135623730951;
};

/// Linear oracle model with Gaussian fast dynamics.
[[nodiscard]] ModelSpec linear_ou(const LinearOuParams& p = {}, double epsilon = 1.0);

/// Registered model by id; unknown ids raise ConfigError listing the registry.
[[nodiscard]] ModelSpec builtin_model(std::string_view id);
[[nodiscard]] const std::vector<std::string>& registry_ids();

}  // namespace msde
