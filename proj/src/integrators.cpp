#include "msde/integrators.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "msde/io.hpp"
#include "msde/parallel.hpp"
#include "msde/stats.hpp"

namespace msde {

Scheme parse_scheme(const std::string& name) {
    if (name == "euler-maruyama") return Scheme::EulerMaruyama;
    if (name == "tamed-euler") return Scheme::TamedEuler;
    if (name == "semi-implicit-fast") return Scheme::SemiImplicitFast;
    throw ConfigError(fmt::format("unknown scheme '{}' (euler-maruyama, tamed-euler, semi-implicit-fast)", name));
}

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::EulerMaruyama: return "euler-maruyama";
        case Scheme::TamedEuler: return "tamed-euler";
        case Scheme::SemiImplicitFast: return "semi-implicit-fast";
    }
    return "?";
}

void IntegratorConfig::validate() const {
    if (!(dt > 0.0)) throw ContractViolation(fmt::format("integrator dt must be positive (got {})", dt));
    if (fast_substeps < 1) throw ContractViolation("fast_substeps must be >= 1");
    if (!(taming_exponent > 0.0 && taming_exponent <= 1.0)) {
        throw ContractViolation(fmt::format("taming_exponent must lie in (0, 1] (got {})", taming_exponent));
    }
    if (!(resolution_safety > 0.0)) throw ContractViolation("resolution_safety must be positive");
    if (record_stride < 1) throw ContractViolation("record_stride must be >= 1");
}

namespace {

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

void add_diffusion(std::span<const double> diffusion, std::span<const double> dW, std::span<double> out) {
    const std::size_t m = dW.size();
    for (std::size_t i = 0; i < out.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += diffusion[i * m + j] * dW[j];
        out[i] += s;
    }
}

void check_inputs(std::span<const double> drift, std::span<const double> diffusion, std::span<const double> state,
                  std::size_t step) {
    if (!all_finite(drift) || !all_finite(diffusion)) {
        throw NumericOverflow(fmt::format("non-finite drift or diffusion at step {}", step), step,
                              Vector(state.begin(), state.end()));
    }
}

}  // namespace

void step_tamed_into(std::span<const double> drift, std::span<const double> diffusion,
                     std::span<const double> state, double dt, std::span<const double> dW, double taming_exponent,
                     std::span<double> out, std::size_t step) {
    check_inputs(drift, diffusion, state, step);
    const double factor = dt / (1.0 + std::pow(dt, taming_exponent) * std::sqrt(norm2(drift)));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = state[i] + factor * drift[i];
    add_diffusion(diffusion, dW, out);
}

Vector step_tamed(std::span<const double> drift, std::span<const double> diffusion, std::span<const double> state,
                  double dt, std::span<const double> dW, const IntegratorConfig& cfg) {
    if (!(dt > 0.0)) throw ContractViolation("step_tamed: dt must be positive");
    require_dim(drift.size(), state.size(), "step_tamed drift");
    require_dim(diffusion.size(), state.size() * dW.size(), "step_tamed diffusion");
    Vector out(state.size());
    step_tamed_into(drift, diffusion, state, dt, dW, cfg.taming_exponent, out);
    return out;
}

void step_euler_into(std::span<const double> drift, std::span<const double> diffusion,
                     std::span<const double> state, double dt, std::span<const double> dW, std::span<double> out,
                     std::size_t step) {
    check_inputs(drift, diffusion, state, step);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = state[i] + dt * drift[i];
    add_diffusion(diffusion, dW, out);
}

void PathBundle::write_csv(std::ostream& os) const {
    os << "# model=" << model_id << ",epsilon=" << io::num(epsilon) << ",seed=" << seed << '\n';
    os << 't';
    for (std::size_t i = 0; i < d1; ++i) os << ",x_" << (i + 1);
    for (std::size_t j = 0; j < d2 && !y.empty(); ++j) os << ",y_" << (j + 1);
    os << '\n';
    for (std::size_t k = 0; k < size(); ++k) {
        os << io::num(t[k]);
        for (double v : x_at(k)) os << ',' << io::num(v);
        if (!y.empty()) {
            for (double v : y_at(k)) os << ',' << io::num(v);
        }
        os << '\n';
    }
}

TimeGrid make_grid(double horizon, double dt) {
    if (!(horizon > 0.0)) throw ContractViolation(fmt::format("horizon must be positive (got {})", horizon));
    if (!(dt > 0.0)) throw ContractViolation(fmt::format("dt must be positive (got {})", dt));
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    return {std::max<std::size_t>(steps, 1), horizon / static_cast<double>(std::max<std::size_t>(steps, 1))};
}

// FastStepper ------------------------------------------------------------------

FastStepper::FastStepper(const ModelSpec& model, Scheme scheme, double h, double taming_exponent,
                         double drift_scale, double b_scale, double noise_scale)
    : model_(&model),
      scheme_(scheme),
      h_(h),
      taming_exponent_(taming_exponent),
      drift_scale_(drift_scale),
      b_scale_(model.traits.has_b ? b_scale : 0.0),
      noise_scale_(noise_scale),
      x_(model.d1, 0.0),
      rate_(model.d2, 0.0),
      work_drift_(model.d2),
      work_b_(model.d2),
      work_g_(model.d2 * model.d2),
      work_dw_(model.d2),
      work_next_(model.d2),
      work_probe_(model.d2) {
    if (!(h > 0.0)) throw ContractViolation("FastStepper: micro step must be positive");
}

void FastStepper::drift(std::span<const double> y, std::span<double> out) {
    model_->B(x_, y, out);
    for (double& v : out) v *= drift_scale_;
    if (b_scale_ != 0.0) {
        model_->b(x_, y, work_b_);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += b_scale_ * work_b_[j];
    }
}

void FastStepper::freeze(std::span<const double> x) {
    std::copy(x.begin(), x.end(), x_.begin());
    std::fill(rate_.begin(), rate_.end(), 0.0);
    if (scheme_ != Scheme::SemiImplicitFast) return;
    // Diagonal linear rate of the drift at y = 0, by central differences.
    const std::size_t d2 = model_->d2;
    constexpr double delta = 1e-4;
    Vector up(d2), down(d2);
    for (std::size_t j = 0; j < d2; ++j) {
        std::fill(work_probe_.begin(), work_probe_.end(), 0.0);
        work_probe_[j] = delta;
        drift(work_probe_, up);
        work_probe_[j] = -delta;
        drift(work_probe_, down);
        const double slope = (up[j] - down[j]) / (2.0 * delta);
        rate_[j] = std::isfinite(slope) ? std::max(0.0, -slope) : 0.0;
    }
}

void FastStepper::step(std::span<double> y, const NoiseStream& noise, std::uint64_t step_index, bool antithetic) {
    const std::size_t d2 = y.size();
    drift(y, work_drift_);
    model_->g(x_, y, work_g_);
    for (double& v : work_g_) v *= noise_scale_;
    const double sh = std::sqrt(h_);
    for (std::size_t j = 0; j < d2; ++j) {
        const double z = noise.normal(step_index, static_cast<std::uint32_t>(j));
        work_dw_[j] = antithetic ? -sh * z : sh * z;
    }
    switch (scheme_) {
        case Scheme::EulerMaruyama:
            step_euler_into(work_drift_, work_g_, y, h_, work_dw_, work_next_, step_index);
            break;
        case Scheme::TamedEuler:
            step_tamed_into(work_drift_, work_g_, y, h_, work_dw_, taming_exponent_, work_next_, step_index);
            break;
        case Scheme::SemiImplicitFast:
            // Remainder after removing the linear part -rate*y, which is
            // treated implicitly.
            for (std::size_t j = 0; j < d2; ++j) work_drift_[j] += rate_[j] * y[j];
            step_tamed_into(work_drift_, work_g_, y, h_, work_dw_, taming_exponent_, work_next_, step_index);
            for (std::size_t j = 0; j < d2; ++j) work_next_[j] /= (1.0 + h_ * rate_[j]);
            break;
    }
    if (!all_finite(work_next_)) {
        throw NumericOverflow(fmt::format("fast component left the finite range at micro step {}", step_index),
                              step_index, Vector(y.begin(), y.end()));
    }
    std::copy(work_next_.begin(), work_next_.end(), y.begin());
}

// MultiscaleStepper --------------------------------------------------------------

MultiscaleStepper::MultiscaleStepper(const ModelSpec& model, const IntegratorConfig& cfg, double dt,
                                     const NoisePath& noise)
    : model_(&model),
      cfg_(cfg),
      dt_(dt),
      time_scale_(model.scales.time_scale()),
      fast_(model, cfg.scheme, dt / static_cast<double>(cfg.fast_substeps), cfg.taming_exponent,
            model.scales.fast_drift_scale(), model.scales.intermediate_scale(), model.scales.fast_noise_scale()),
      w1_(noise.channel(Channel::SlowW1)),
      w2_(noise.channel(Channel::FastW2)),
      x_(model.d1),
      y_(model.d2),
      f_(model.d1),
      sig_(model.d1 * model.d1),
      dw_(model.d1),
      next_(model.d1) {}

void MultiscaleStepper::reset(std::span<const double> x0, std::span<const double> y0) {
    require_dim(x0.size(), model_->d1, "initial x");
    require_dim(y0.size(), model_->d2, "initial y");
    std::copy(x0.begin(), x0.end(), x_.begin());
    std::copy(y0.begin(), y0.end(), y_.begin());
}

void MultiscaleStepper::step(std::size_t k) {
    fast_.freeze(x_);
    const std::uint64_t base = static_cast<std::uint64_t>(k) * cfg_.fast_substeps;
    for (std::size_t j = 0; j < cfg_.fast_substeps; ++j) fast_.step(y_, w2_, base + j);

    const double s = time_scale_ * static_cast<double>(k) * dt_;
    model_->f(s, x_, y_, f_);
    model_->sigma(s, x_, sig_);
    w1_.increments(k, dt_, dw_);
    if (cfg_.scheme == Scheme::EulerMaruyama) {
        step_euler_into(f_, sig_, x_, dt_, dw_, next_, k);
    } else {
        step_tamed_into(f_, sig_, x_, dt_, dw_, cfg_.taming_exponent, next_, k);
    }
    if (!all_finite(next_)) {
        throw NumericOverflow(fmt::format("slow component left the finite range at step {}", k), k, x_);
    }
    std::copy(next_.begin(), next_.end(), x_.begin());
}

void check_fast_resolution(const ModelSpec& model, const IntegratorConfig& cfg, double dt) {
    const double micro = dt / static_cast<double>(cfg.fast_substeps);
    const double limit = cfg.resolution_safety * model.scales.fast_time();
    if (micro > limit * (1.0 + 1e-12)) {
        throw ContractViolation(fmt::format(
            "fast scale not resolved: micro step {:.6g} exceeds {:.6g} * eps^(2 alpha) = {:.6g}; "
            "use dt <= {:.6g} with {} fast substeps",
            micro, cfg.resolution_safety, limit, limit * static_cast<double>(cfg.fast_substeps), cfg.fast_substeps));
    }
}

PathBundle integrate_multiscale(const ModelSpec& model, const State& initial, double horizon,
                                const IntegratorConfig& cfg, const NoisePath& noise) {
    cfg.validate();
    const TimeGrid grid = make_grid(horizon, cfg.dt);
    check_fast_resolution(model, cfg, grid.dt);

    MultiscaleStepper stepper(model, cfg, grid.dt, noise);
    stepper.reset(initial.x, initial.y);

    PathBundle out;
    out.model_id = model.id;
    out.epsilon = model.scales.epsilon;
    out.seed = noise.seed;
    out.d1 = model.d1;
    out.d2 = model.d2;
    const std::size_t n_rec = grid.steps / cfg.record_stride + 1;
    out.t.reserve(n_rec);
    out.x.reserve(n_rec * model.d1);
    out.y.reserve(n_rec * model.d2);
    auto record = [&](std::size_t k) {
        out.t.push_back(initial.t + static_cast<double>(k) * grid.dt);
        out.x.insert(out.x.end(), stepper.x().begin(), stepper.x().end());
        out.y.insert(out.y.end(), stepper.y().begin(), stepper.y().end());
    };
    record(0);
    for (std::size_t k = 0; k < grid.steps; ++k) {
        stepper.step(k);
        if ((k + 1) % cfg.record_stride == 0 || k + 1 == grid.steps) record(k + 1);
    }
    return out;
}

// Scheme self-tests ------------------------------------------------------------------

ScalarSdeCase bounded_drift_case() {
    return {"bounded-drift-gbm", [](double x) { return std::sin(x); }, [](double x) { return 0.5 * x; }, 1.0, 1.0};
}

ScalarSdeCase deterministic_case() {
    return {"deterministic-cubic", [](double x) { return -x - x * x * x; }, [](double) { return 0.0; }, 1.0, 1.0};
}

ConvergenceReport strong_order_probe(const ScalarSdeCase& c, std::span<const double> dt_list, std::size_t n_paths,
                                     const IntegratorConfig& cfg, std::uint64_t seed) {
    if (dt_list.size() < 3) throw ContractViolation("strong_order_probe: need >=3 resolutions");
    for (std::size_t i = 1; i < dt_list.size(); ++i) {
        if (!(dt_list[i] < dt_list[i - 1])) throw ContractViolation("strong_order_probe: dt_list must be strictly decreasing");
    }
    if (n_paths == 0) throw ContractViolation("strong_order_probe: n_paths must be positive");
    const double ref_dt = dt_list.back() / 8.0;
    const auto ref_steps = static_cast<std::size_t>(std::llround(c.horizon / ref_dt));
    if (std::abs(static_cast<double>(ref_steps) * ref_dt - c.horizon) > 1e-9 * c.horizon) {
        throw ContractViolation("strong_order_probe: horizon must be a multiple of the reference step");
    }
    std::vector<std::size_t> factors;
    for (double dt : dt_list) {
        const double r = dt / ref_dt;
        const auto f = static_cast<std::size_t>(std::llround(r));
        if (f == 0 || std::abs(r - static_cast<double>(f)) > 1e-9 * r) {
            throw ContractViolation(fmt::format("strong_order_probe: dt={} is not a multiple of the reference step", dt));
        }
        factors.push_back(f);
    }

    const bool tamed = cfg.scheme != Scheme::EulerMaruyama;
    auto advance = [&](double x, double dt, double dw, std::size_t step) {
        const double drift = c.drift(x);
        const double diff = c.diffusion(x);
        double out = 0.0;
        if (tamed) {
            step_tamed_into({&drift, 1}, {&diff, 1}, {&x, 1}, dt, {&dw, 1}, cfg.taming_exponent, {&out, 1}, step);
        } else {
            step_euler_into({&drift, 1}, {&diff, 1}, {&x, 1}, dt, {&dw, 1}, {&out, 1}, step);
        }
        return out;
    };

    const std::size_t n_levels = dt_list.size();
    std::vector<double> sq_err(n_paths * n_levels);
    parallel_for(n_paths, [&](std::size_t p) {
        const NoiseStream w = NoisePath{seed, p}.channel(Channel::Auxiliary);
        double ref = c.x0;
        const double sref = std::sqrt(ref_dt);
        for (std::size_t k = 0; k < ref_steps; ++k) ref = advance(ref, ref_dt, sref * w.normal(k, 0), k);
        for (std::size_t l = 0; l < n_levels; ++l) {
            const std::size_t f = factors[l];
            const std::size_t steps = ref_steps / f;
            const double dt = ref_dt * static_cast<double>(f);
            double x = c.x0;
            for (std::size_t k = 0; k < steps; ++k) x = advance(x, dt, w.coarse_increment(k, 0, ref_dt, f), k);
            sq_err[l * n_paths + p] = (x - ref) * (x - ref);
        }
    });

    ConvergenceReport rep;
    rep.metric = Metric::StrongRms;
    rep.abscissa = "dt";
    rep.seeds = {seed};
    for (std::size_t l = 0; l < n_levels; ++l) {
        const auto ms = stats::mean_se(std::span<const double>(sq_err).subspan(l * n_paths, n_paths));
        const double rms = std::sqrt(ms.mean);
        const double se = rms > 0.0 ? ms.se / (2.0 * rms) : 0.0;
        rep.rows.push_back({dt_list[l], rms, se, n_paths, 0});
    }
    if (n_paths < 100) rep.warnings.push_back("n_paths < 100: confidence intervals are unreliable");
    rep.validate();
    rep.fit_if_possible();
    return rep;
}

}  // namespace msde
