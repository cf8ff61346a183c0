#include "msde/model.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace msde {

void ScaleExponents::validate() const {
    if (!(alpha > 0.0)) throw ContractViolation(fmt::format("alpha must be positive (got {})", alpha));
    if (!(beta >= 0.0 && beta < 2.0 * alpha)) {
        throw ContractViolation(fmt::format("need 0 <= beta < 2 alpha (beta={}, alpha={})", beta, alpha));
    }
    if (!(gamma > 0.0 && gamma < 2.0 * alpha)) {
        throw ContractViolation(fmt::format("need 0 < gamma < 2 alpha (gamma={}, alpha={})", gamma, alpha));
    }
    if (!(epsilon > 0.0 && epsilon <= 1.0)) {
        throw ContractViolation(fmt::format("epsilon must lie in (0, 1] (got {})", epsilon));
    }
}

double ScaleExponents::fast_drift_scale() const { return std::pow(epsilon, -2.0 * alpha); }
double ScaleExponents::intermediate_scale() const { return std::pow(epsilon, -beta); }
double ScaleExponents::fast_noise_scale() const { return std::pow(epsilon, -alpha); }
double ScaleExponents::time_scale() const { return std::pow(epsilon, -gamma); }
double ScaleExponents::fast_time() const { return std::pow(epsilon, 2.0 * alpha); }

// AssumptionMeta -------------------------------------------------------------

const std::set<std::string, std::less<>>& AssumptionMeta::known_symbols() {
    static const std::set<std::string, std::less<>> names{
        "eta",  "eta_prime", "eta_tilde", "theta", "theta1", "theta2", "lambda1", "lambda2",
        "kappa1", "kappa2", "K1", "K2", "K3", "K4", "K5", "K6", "K7", "K8",
        "M",    "L_sigma",   "L_g",       "L_b"};
    return names;
}

const std::set<std::string, std::less<>>& AssumptionMeta::known_flags() {
    // hx6: the user declares the slow drift jointly monotone (needed by the
    // quasi-periodic long-time experiment).
    static const std::set<std::string, std::less<>> names{"hx6"};
    return names;
}

void AssumptionMeta::set(std::string_view name, double value) {
    if (!known_symbols().contains(name)) {
        throw ConfigError(fmt::format("unknown assumption constant '{}'", name));
    }
    constants_[std::string(name)] = value;
}

void AssumptionMeta::set_flag(std::string_view name, bool on) {
    if (!known_flags().contains(name)) throw ConfigError(fmt::format("unknown assumption flag '{}'", name));
    if (on) {
        flags_.insert(std::string(name));
    } else if (auto it = flags_.find(name); it != flags_.end()) {
        flags_.erase(it);
    }
}

std::optional<double> AssumptionMeta::get(std::string_view name) const {
    if (auto it = constants_.find(name); it != constants_.end()) return it->second;
    return std::nullopt;
}

double AssumptionMeta::require(std::string_view name) const {
    if (auto v = get(name)) return *v;
    throw ConfigError(fmt::format("assumption constant '{}' is not declared in the model metadata", name));
}

bool AssumptionMeta::flag(std::string_view name) const { return flags_.contains(name); }

void AssumptionMeta::validate() const {
    for (const auto& [k, v] : constants_) {
        if (!std::isfinite(v)) throw ConfigError(fmt::format("assumption constant '{}' is not finite", k));
    }
    if (auto eta = get("eta"); eta && !(*eta > 0.0)) throw ConfigError("assumption constant 'eta' must be > 0");
    if (auto theta = get("theta"); theta && !(*theta >= 2.0)) {
        throw ConfigError("assumption constant 'theta' must be >= 2");
    }
}

// ModelSpec ------------------------------------------------------------------

void ModelSpec::validate() const {
    if (d1 == 0 || d2 == 0) throw ContractViolation("model dimensions must be positive");
    if (!f || !sigma || !B || !g) throw ContractViolation(fmt::format("model '{}' is missing a coefficient", id));
    if (traits.has_b && !b) throw ContractViolation(fmt::format("model '{}' declares b but provides none", id));
    scales.validate();
    meta.validate();
}

ModelSpec ModelSpec::with_epsilon(double epsilon) const {
    ModelSpec out = *this;
    out.scales.epsilon = epsilon;
    out.scales.validate();
    return out;
}

Vector eval_slow_drift(const ModelSpec& m, double t, std::span<const double> x, std::span<const double> y) {
    require_dim(x.size(), m.d1, "eval_slow_drift x");
    require_dim(y.size(), m.d2, "eval_slow_drift y");
    Vector out(m.d1);
    m.f(t, x, y, out);
    return out;
}

Matrix eval_slow_diffusion(const ModelSpec& m, double t, std::span<const double> x) {
    require_dim(x.size(), m.d1, "eval_slow_diffusion x");
    Matrix out(m.d1, m.d1);
    m.sigma(t, x, out.data());
    return out;
}

Vector eval_fast_drift(const ModelSpec& m, std::span<const double> x, std::span<const double> y) {
    require_dim(x.size(), m.d1, "eval_fast_drift x");
    require_dim(y.size(), m.d2, "eval_fast_drift y");
    Vector out(m.d2);
    m.B(x, y, out);
    return out;
}

Vector eval_intermediate_drift(const ModelSpec& m, std::span<const double> x, std::span<const double> y) {
    require_dim(x.size(), m.d1, "eval_intermediate_drift x");
    require_dim(y.size(), m.d2, "eval_intermediate_drift y");
    Vector out(m.d2, 0.0);
    if (m.traits.has_b) m.b(x, y, out);
    return out;
}

Matrix eval_fast_diffusion(const ModelSpec& m, std::span<const double> x, std::span<const double> y) {
    require_dim(x.size(), m.d1, "eval_fast_diffusion x");
    require_dim(y.size(), m.d2, "eval_fast_diffusion y");
    Matrix out(m.d2, m.d2);
    m.g(x, y, out.data());
    return out;
}

// Built-in models --------------------------------------------------------------

namespace {

SlowDiffusionFn constant_sigma(double s) {
    return [s](double, std::span<const double>, std::span<double> out) { out[0] = s; };
}

FastDiffusionFn constant_g(double s) {
    return [s](std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = s; };
}

}  // namespace

ModelSpec vanderpol_to_system(double mu, double a, double nu) {
    if (!(mu > 1.0)) {
        throw ContractViolation(fmt::format("vanderpol: mu must exceed 1 so that eps = 1/mu^2 < 1 (got {})", mu));
    }
    ModelSpec m;
    m.id = "vanderpol";
    m.d1 = 1;
    m.d2 = 1;
    const double omega = 2.0 * std::numbers::pi * nu;
    m.f = [a, omega](double t, std::span<const double>, std::span<const double> y, std::span<double> out) {
        out[0] = a * std::sin(omega * t) - y[0];
    };
    m.sigma = constant_sigma(0.0);
    m.B = [](std::span<const double> x, std::span<const double> y, std::span<double> out) {
        out[0] = x[0] - y[0] * y[0] * y[0] / 3.0 + y[0];
    };
    m.g = constant_g(0.0);
    m.scales = {.alpha = 0.5, .beta = 0.0, .gamma = 0.5, .epsilon = 1.0 / (mu * mu)};
    m.traits = {.time_independent = (a == 0.0), .sigma_constant = true, .fast_independent_of_x = false,
                .has_b = false};
    if (a != 0.0) m.forcing_frequencies = {omega};
    if (m.scales.epsilon > 0.25) {
        m.warnings.push_back(fmt::format("eps = {:.6g} is not small; averaging predictions are not expected to hold",
                                         m.scales.epsilon));
    }
    m.validate();
    return m;
}

ModelSpec example_5_1(double epsilon) {
    ModelSpec m;
    m.id = "example-5-1";
    m.f = [](double, std::span<const double> x, std::span<const double> y, std::span<double> out) {
        const double xv = x[0];
        const double yv = y[0];
        out[0] = xv - xv * xv * xv + yv * yv * std::sin(xv) + yv;
    };
    m.sigma = constant_sigma(1.0);
    m.B = [](std::span<const double> x, std::span<const double> y, std::span<double> out) {
        const double s = std::sin(x[0]);
        const double yv = y[0];
        const double y2 = yv * yv;
        out[0] = -(s * s) * y2 * y2 * yv - y2 * yv - yv;
    };
    m.g = constant_g(1.0);
    m.scales = {.alpha = 0.5, .beta = 0.0, .gamma = 0.5, .epsilon = epsilon};
    m.traits = {.time_independent = true, .sigma_constant = true, .fast_independent_of_x = false, .has_b = false};
    // 2<B,y> + |g|^2 = -2 sin^2(x) y^6 - 2y^4 - 2y^2 + 1; B is decreasing in y
    // with slope <= -1, so the coupled contraction rate is 2.
    m.meta.set("eta", 2.0);
    m.meta.set("eta_prime", 2.0);
    m.meta.set("theta", 4.0);
    m.meta.set("K1", 1.0);
    m.meta.set("K2", 2.0);
    m.meta.set("theta1", 3.0);
    m.meta.set("theta2", 2.0);
    m.meta.set("K4", 4.0);
    m.meta.set("K5", 2.0);
    m.validate();
    return m;
}

ModelSpec example_5_2(const Example52Params& p, double epsilon) {
    ModelSpec m;
    m.id = "example-5-2";
    const double sqrt2 = std::numbers::sqrt2;
    m.f = [p, sqrt2](double t, std::span<const double> x, std::span<const double> y, std::span<double> out) {
        const double xv = x[0];
        const double yv = y[0];
        const double forcing = std::cos(t) + std::sin(sqrt2 * t);
        double v = -p.a1 * xv - xv * xv * xv + (p.a2 * yv + p.a3 * yv * yv * yv) * forcing;
        if (p.a4 != 0.0) {
            const double s = std::sin(t);
            const double y2 = yv * yv;
            v -= p.a4 * xv * y2 * y2 * s * s;
        }
        out[0] = v;
    };
    m.sigma = constant_sigma(1.0);
    m.B = [](std::span<const double>, std::span<const double> y, std::span<double> out) {
        out[0] = -y[0] * y[0] * y[0] - y[0];
    };
    m.b = [](std::span<const double> x, std::span<const double> y, std::span<double> out) { out[0] = x[0] + y[0]; };
    m.g = constant_g(1.0);
    m.scales = {.alpha = 0.5, .beta = 1.0 / 3.0, .gamma = 0.5, .epsilon = epsilon};
    m.traits = {.time_independent = false, .sigma_constant = true, .fast_independent_of_x = true, .has_b = true};
    m.forcing_frequencies = {1.0, sqrt2};
    m.meta.set("eta", 2.0);
    m.meta.set("eta_prime", 2.0);
    m.meta.set("theta", 4.0);
    m.meta.set("K1", 1.0);
    m.meta.set("K2", 2.0);
    m.meta.set("L_b", 1.0);
    m.meta.set("lambda1", p.a1);
    m.meta.set("lambda2", 4.0 * p.a2 * p.a2 / p.a1);
    if (p.a4 == 0.0) m.meta.set_flag("hx6");
    m.validate();
    return m;
}

ModelSpec linear_ou(const LinearOuParams& p, double epsilon) {
    ModelSpec m;
    m.id = "linear-ou";
    m.f = [k = p.slow_rate](double, std::span<const double> x, std::span<const double> y, std::span<double> out) {
        out[0] = -k * x[0] + y[0];
    };
    m.sigma = constant_sigma(p.sigma);
    m.B = [r = p.fast_rate](std::span<const double>, std::span<const double> y, std::span<double> out) {
        out[0] = -r * y[0];
    };
    m.g = constant_g(p.g);
    m.scales = {.alpha = 0.5, .beta = 0.0, .gamma = 0.5, .epsilon = epsilon};
    m.traits = {.time_independent = true, .sigma_constant = true, .fast_independent_of_x = true, .has_b = false};
    // 2<-r y, y> + g^2 = -2r |y|^2 + g^2
    m.meta.set("eta", 2.0 * p.fast_rate);
    m.meta.set("eta_prime", 0.0);
    m.meta.set("theta", 2.0);
    m.meta.set("K1", p.g * p.g);
    if (p.slow_rate > 0.0) {
        m.meta.set("lambda1", p.slow_rate);
        m.meta.set("lambda2", 1.0 / p.slow_rate);
        m.meta.set_flag("hx6");
    }
    m.validate();
    return m;
}

const std::vector<std::string>& registry_ids() {
    static const std::vector<std::string> ids{"vanderpol", "example-5-1", "example-5-2", "linear-ou"};
    return ids;
}

ModelSpec builtin_model(std::string_view id) {
    if (id == "vanderpol") return vanderpol_to_system(10.0, 0.5, 1.0);
    if (id == "example-5-1") return example_5_1();
    if (id == "example-5-2") return example_5_2();
    if (id == "linear-ou") return linear_ou();
    throw ConfigError(fmt::format("unknown model id '{}'; registered models: {}", id, fmt::join(registry_ids(), ", ")));
}

}  // namespace msde
