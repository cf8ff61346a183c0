#include "msde/averaging.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "msde/io.hpp"
#include "msde/parallel.hpp"
#include "msde/stats.hpp"

namespace msde {

using boost::math::interpolators::cardinal_cubic_b_spline;

void AveragedModel::validate() const {
    if (d1 == 0) throw ContractViolation("averaged model dimension must be positive");
    if (!f_bar || !sigma_bar) throw ContractViolation(fmt::format("averaged model '{}' is incomplete", id));
}

Vector eval_f_bar(const AveragedModel& avg, std::span<const double> x) {
    require_dim(x.size(), avg.d1, "eval_f_bar x");
    Vector out(avg.d1);
    avg.f_bar(x, out);
    return out;
}

Matrix eval_sigma_bar(const AveragedModel& avg, std::span<const double> x) {
    require_dim(x.size(), avg.d1, "eval_sigma_bar x");
    Matrix out(avg.d1, avg.d1);
    avg.sigma_bar(x, out.data());
    return out;
}

namespace {

AveragedFieldFn constant_field(double v) {
    return [v](std::span<const double>, std::span<double> out) { out[0] = v; };
}

struct GibbsTable {
    static constexpr std::size_t kNodes = 257;
    cardinal_cubic_b_spline<double> spline;

    static double moment2(double s) {
        using boost::math::quadrature::gauss_kronrod;
        auto potential = [s](double y) {
            const double y2 = y * y;
            return y2 + 0.5 * y2 * y2 + s * y2 * y2 * y2 / 3.0;
        };
        auto z = [&](double y) { return std::exp(-potential(y)); };
        auto m = [&](double y) { return y * y * std::exp(-potential(y)); };
        const double inf = std::numeric_limits<double>::infinity();
        const double zi = gauss_kronrod<double, 61>::integrate(z, 0.0, inf, 15, 1e-14);
        const double mi = gauss_kronrod<double, 61>::integrate(m, 0.0, inf, 15, 1e-14);
        return mi / zi;
    }

    static std::vector<double> values() {
        std::vector<double> v(kNodes);
        for (std::size_t i = 0; i < kNodes; ++i) v[i] = moment2(static_cast<double>(i) / (kNodes - 1));
        return v;
    }

    GibbsTable() : spline([] {
          static const std::vector<double> v = values();
          return cardinal_cubic_b_spline<double>(v.begin(), v.end(), 0.0, 1.0 / (kNodes - 1));
      }()) {}
};

const GibbsTable& gibbs_table() {
    static const GibbsTable table;
    return table;
}

void check_s(double s) {
    if (!(s >= -1e-12 && s <= 1.0 + 1e-12)) {
        throw ContractViolation(fmt::format("gibbs_m2: s = {} outside the tabulated range [0, 1]", s));
    }
}

}  // namespace

double gibbs_m2(double s) {
    check_s(s);
    return gibbs_table().spline(std::clamp(s, 0.0, 1.0));
}

double gibbs_m2_prime(double s) {
    check_s(s);
    return gibbs_table().spline.prime(std::clamp(s, 0.0, 1.0));
}

AveragedModel averaged_example_5_2(const Example52Params& p) {
    AveragedModel a;
    a.id = "example-5-2";
    a.kind = "analytic";
    a.f_bar = [a1 = p.a1](std::span<const double> x, std::span<double> out) {
        out[0] = -a1 * x[0] - x[0] * x[0] * x[0];
    };
    a.grad_f_bar = [a1 = p.a1](std::span<const double> x, std::span<double> out) {
        out[0] = -a1 - 3.0 * x[0] * x[0];
    };
    a.sigma_bar = constant_field(1.0);
    a.lambda1 = p.a1;
    return a;
}

AveragedModel averaged_example_5_1() {
    AveragedModel a;
    a.id = "example-5-1";
    a.kind = "gibbs-quadrature";
    a.f_bar = [](std::span<const double> x, std::span<double> out) {
        const double v = x[0];
        const double s = std::sin(v);
        out[0] = v - v * v * v + s * gibbs_m2(s * s);
    };
    a.grad_f_bar = [](std::span<const double> x, std::span<double> out) {
        const double v = x[0];
        const double s = std::sin(v), c = std::cos(v);
        const double s2 = s * s;
        out[0] = 1.0 - 3.0 * v * v + c * gibbs_m2(s2) + s * gibbs_m2_prime(s2) * 2.0 * s * c;
    };
    a.sigma_bar = constant_field(1.0);
    a.lambda1 = 1.0;
    return a;
}

AveragedModel averaged_linear_ou(const LinearOuParams& p) {
    AveragedModel a;
    a.id = "linear-ou";
    a.kind = "analytic";
    a.f_bar = [k = p.slow_rate](std::span<const double> x, std::span<double> out) { out[0] = -k * x[0]; };
    a.grad_f_bar = [k = p.slow_rate](std::span<const double>, std::span<double> out) { out[0] = -k; };
    a.sigma_bar = constant_field(p.sigma);
    if (p.slow_rate > 0.0) a.lambda1 = p.slow_rate;
    return a;
}

AveragedModel builtin_averaged(std::string_view id) {
    if (id == "example-5-1") return averaged_example_5_1();
    if (id == "example-5-2") return averaged_example_5_2();
    if (id == "linear-ou") return averaged_linear_ou();
    if (id == "vanderpol") {
        throw ConfigError("vanderpol has a deterministic fast equation with no unique invariant measure; "
                          "no averaged model is registered");
    }
    throw ConfigError(fmt::format("no averaged model registered for '{}'", id));
}

// Tabulated averaging ------------------------------------------------------------

struct AveragedTable::Impl {
    double lo, hi;
    cardinal_cubic_b_spline<double> f, s;
};

namespace {

/// End slopes from four-point one-sided differences; exact for cubics.
cardinal_cubic_b_spline<double> table_spline(const Vector& v, double lo, double h) {
    const std::size_t n = v.size();
    const double left = (-11.0 * v[0] + 18.0 * v[1] - 9.0 * v[2] + 2.0 * v[3]) / (6.0 * h);
    const double right = (11.0 * v[n - 1] - 18.0 * v[n - 2] + 9.0 * v[n - 3] - 2.0 * v[n - 4]) / (6.0 * h);
    return cardinal_cubic_b_spline<double>(v.begin(), v.end(), lo, h, left, right);
}

}  // namespace

AveragedTable::AveragedTable(const ModelSpec& model, const TableSpec& spec)
    : id_(model.id), lambda1_(model.meta.get("lambda1")) {
    if (model.d1 != 1) throw ContractViolation("averaged tables support d1 = 1 only");
    if (!(spec.hi > spec.lo) || spec.nodes < 4) throw ContractViolation("table grid needs hi > lo and >= 4 nodes");
    const std::size_t n = spec.nodes;
    const double h = (spec.hi - spec.lo) / static_cast<double>(n - 1);
    grid_.resize(n);
    f_.resize(n);
    s_.resize(n);
    for (std::size_t i = 0; i < n; ++i) grid_[i] = spec.lo + h * static_cast<double>(i);
    parallel_for(
        n,
        [&](std::size_t i) {
            FrozenSpec fs = spec.frozen;
            fs.x = {grid_[i]};
            const EmpiricalMeasure mu = sample_invariant(model, fs, NoisePath{spec.seed, i});
            f_[i] = averaged_drift_bar(model, fs.x, spec.T_avg, mu)[0];
            s_[i] = averaged_diffusion_bar(model, fs.x, spec.T_avg)(0, 0);
        },
        spec.threads);
    impl_ = std::make_shared<const Impl>(
        Impl{spec.lo, spec.hi, table_spline(f_, spec.lo, h), table_spline(s_, spec.lo, h)});
}

AveragedModel AveragedTable::model() const {
    auto guard = [impl = impl_](double x) {
        if (!(x >= impl->lo && x <= impl->hi)) {
            throw ContractViolation(fmt::format("averaged table evaluated at x = {} outside its range [{}, {}]",
                                                io::num(x), io::num(impl->lo), io::num(impl->hi)));
        }
    };
    AveragedModel a;
    a.id = id_;
    a.kind = "table";
    a.f_bar = [impl = impl_, guard](std::span<const double> x, std::span<double> out) {
        guard(x[0]);
        out[0] = impl->f(x[0]);
    };
    a.grad_f_bar = [impl = impl_, guard](std::span<const double> x, std::span<double> out) {
        guard(x[0]);
        out[0] = impl->f.prime(x[0]);
    };
    a.sigma_bar = [impl = impl_, guard](std::span<const double> x, std::span<double> out) {
        guard(x[0]);
        out[0] = impl->s(x[0]);
    };
    a.sigma_constant = std::all_of(s_.begin(), s_.end(), [&](double v) { return v == s_.front(); });
    a.lambda1 = lambda1_;
    return a;
}

void AveragedTable::write_csv(std::ostream& os) const {
    os << "x,f_bar,sigma_bar\n";
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        os << io::num(grid_[i]) << ',' << io::num(f_[i]) << ',' << io::num(s_[i]) << '\n';
    }
}

AveragedModel averaged_hmm(const ModelSpec& model, const FrozenSpec& frozen, double T_avg, std::uint64_t seed) {
    AveragedModel a;
    a.id = model.id;
    a.kind = "hmm";
    a.d1 = model.d1;
    auto model_ptr = std::make_shared<const ModelSpec>(model);
    a.f_bar = [model_ptr, frozen, T_avg, seed](std::span<const double> x, std::span<double> out) {
        FrozenSpec fs = frozen;
        fs.x.assign(x.begin(), x.end());
        std::uint64_t key = 0;
        for (double v : x) key = mix64(key ^ std::bit_cast<std::uint64_t>(v));
        const EmpiricalMeasure mu = sample_invariant(*model_ptr, fs, NoisePath{seed, key});
        const Vector v = averaged_drift_bar(*model_ptr, x, T_avg, mu);
        std::copy(v.begin(), v.end(), out.begin());
    };
    a.sigma_bar = [model_ptr, T_avg](std::span<const double> x, std::span<double> out) {
        const Matrix m = averaged_diffusion_bar(*model_ptr, x, T_avg);
        std::copy(m.data().begin(), m.data().end(), out.begin());
    };
    a.sigma_constant = model.traits.sigma_constant;
    a.lambda1 = model.meta.get("lambda1");
    return a;
}

// Simulation --------------------------------------------------------------------

AveragedStepper::AveragedStepper(const AveragedModel& avg, const IntegratorConfig& cfg, double dt,
                                 const NoisePath& noise)
    : avg_(&avg), cfg_(cfg), dt_(dt), w1_(noise.channel(Channel::SlowW1)), x_(avg.d1), f_(avg.d1),
      s_(avg.d1 * avg.d1), dw_(avg.d1), next_(avg.d1) {}

void AveragedStepper::reset(std::span<const double> x0) {
    require_dim(x0.size(), avg_->d1, "averaged x0");
    std::copy(x0.begin(), x0.end(), x_.begin());
}

void AveragedStepper::step(std::size_t k) {
    avg_->f_bar(x_, f_);
    avg_->sigma_bar(x_, s_);
    w1_.increments(k, dt_, dw_);
    if (cfg_.scheme == Scheme::EulerMaruyama) {
        step_euler_into(f_, s_, x_, dt_, dw_, next_, k);
    } else {
        step_tamed_into(f_, s_, x_, dt_, dw_, cfg_.taming_exponent, next_, k);
    }
    for (double v : next_) {
        if (!std::isfinite(v)) throw NumericOverflow(fmt::format("averaged path overflow at step {}", k), k, x_);
    }
    std::swap(x_, next_);
}


namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

struct CoupledSetup {
    ModelSpec model;
    IntegratorConfig cfg;
    TimeGrid grid;
};

CoupledSetup coupled_setup(const ModelSpec& model, const AveragedModel& avg, std::span<const double> x0,
                           std::span<const double> y0, double epsilon, const IntegratorConfig& cfg,
                           const StrongErrorConfig& run) {
    require_dim(x0.size(), model.d1, "coupled x0");
    require_dim(y0.size(), model.d2, "coupled y0");
    require_dim(avg.d1, model.d1, "averaged model dimension");
    if (run.n_paths < 2) throw ContractViolation("coupled runs need at least two paths");
    cfg.validate();
    CoupledSetup s{model.with_epsilon(epsilon), cfg, {}};
    s.cfg.dt = coupled_dt(s.model, cfg);
    s.grid = make_grid(run.horizon, s.cfg.dt);
    check_fast_resolution(s.model, s.cfg, s.grid.dt);
    return s;
}

}  // namespace

PathBundle simulate_averaged(const AveragedModel& avg, std::span<const double> x0, double horizon,
                             const IntegratorConfig& cfg, const NoisePath& noise) {
    avg.validate();
    cfg.validate();
    require_dim(x0.size(), avg.d1, "simulate_averaged x0");
    const TimeGrid grid = make_grid(horizon, cfg.dt);
    AveragedStepper stepper(avg, cfg, grid.dt, noise);
    stepper.reset(x0);
    PathBundle out;
    out.model_id = avg.id + "-averaged";
    out.seed = noise.seed;
    out.d1 = avg.d1;
    auto record = [&](std::size_t k) {
        out.t.push_back(static_cast<double>(k) * grid.dt);
        out.x.insert(out.x.end(), stepper.x().begin(), stepper.x().end());
    };
    record(0);
    for (std::size_t k = 0; k < grid.steps; ++k) {
        stepper.step(k);
        if ((k + 1) % cfg.record_stride == 0 || k + 1 == grid.steps) record(k + 1);
    }
    return out;
}

double coupled_dt(const ModelSpec& model, const IntegratorConfig& cfg) {
    return std::min(cfg.dt, model.scales.fast_time() / 10.0);
}

StrongErrorResult strong_error(const ModelSpec& model, const AveragedModel& avg, std::span<const double> x0,
                               std::span<const double> y0, double epsilon, const IntegratorConfig& cfg,
                               const StrongErrorConfig& run) {
    const CoupledSetup s = coupled_setup(model, avg, x0, y0, epsilon, cfg, run);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> sup(run.n_paths, nan);
    parallel_for(
        run.n_paths,
        [&](std::size_t p) {
            const NoisePath noise{run.seed, p};
            MultiscaleStepper ms(s.model, s.cfg, s.grid.dt, noise);
            AveragedStepper av(avg, s.cfg, s.grid.dt, noise);
            ms.reset(x0, y0);
            av.reset(x0);
            double worst = 0.0;
            try {
                for (std::size_t k = 0; k < s.grid.steps; ++k) {
                    ms.step(k);
                    av.step(k);
                    worst = std::max(worst, sq_dist(ms.x(), av.x()));
                }
            } catch (const NumericOverflow&) {
                return;
            }
            sup[p] = worst;
        },
        run.threads);

    std::vector<double> ok;
    for (double v : sup) {
        if (!std::isnan(v)) ok.push_back(v);
    }
    StrongErrorResult r;
    r.epsilon = epsilon;
    r.dt = s.grid.dt;
    r.n_paths = ok.size();
    r.n_exploded = run.n_paths - ok.size();
    r.flagged = static_cast<double>(r.n_exploded) > 1e-3 * static_cast<double>(run.n_paths);
    if (ok.empty()) throw NumericError(fmt::format("every path exploded at eps = {}", epsilon));
    const auto m = stats::mean_se(ok);
    r.error = m.mean;
    r.se = m.se;
    return r;
}

ConvergenceReport strong_rate_sweep(const ModelSpec& model, const AveragedModel& avg, std::span<const double> x0,
                                    std::span<const double> y0, std::span<const double> eps_list,
                                    const IntegratorConfig& cfg, const StrongErrorConfig& run) {
    ConvergenceReport rep;
    rep.metric = Metric::StrongSupSquare;
    rep.seeds = {run.seed};
    for (double eps : eps_list) {
        const StrongErrorResult r = strong_error(model, avg, x0, y0, eps, cfg, run);
        rep.rows.push_back({eps, r.error, r.se, r.n_paths, r.n_exploded});
        if (r.flagged) {
            rep.warnings.push_back(fmt::format("eps = {}: {} of {} paths exploded (above 0.1%)", io::num(eps),
                                               r.n_exploded, run.n_paths));
        }
    }
    rep.validate();
    if (!model.traits.time_independent) {
        rep.warnings.push_back("time-oscillating coefficients: no rate is asserted for this sweep");
    }
    rep.fit_if_possible();
    return rep;
}

StrongErrorResult sup_mean_square_gap(const ModelSpec& model, const AveragedModel& avg, std::span<const double> x0,
                                      std::span<const double> y0, double epsilon, const IntegratorConfig& cfg,
                                      const StrongErrorConfig& run) {
    const CoupledSetup s = coupled_setup(model, avg, x0, y0, epsilon, cfg, run);
    const std::size_t steps = s.grid.steps;
    std::vector<double> sq(run.n_paths * steps, 0.0);
    std::vector<char> exploded(run.n_paths, 0);
    parallel_for(
        run.n_paths,
        [&](std::size_t p) {
            const NoisePath noise{run.seed, p};
            MultiscaleStepper ms(s.model, s.cfg, s.grid.dt, noise);
            AveragedStepper av(avg, s.cfg, s.grid.dt, noise);
            ms.reset(x0, y0);
            av.reset(x0);
            try {
                for (std::size_t k = 0; k < steps; ++k) {
                    ms.step(k);
                    av.step(k);
                    sq[k * run.n_paths + p] = sq_dist(ms.x(), av.x());
                }
            } catch (const NumericOverflow&) {
                exploded[p] = 1;
            }
        },
        run.threads);

    std::vector<double> column;
    StrongErrorResult r;
    r.epsilon = epsilon;
    r.dt = s.grid.dt;
    r.n_exploded = static_cast<std::size_t>(std::count(exploded.begin(), exploded.end(), 1));
    r.n_paths = run.n_paths - r.n_exploded;
    r.flagged = static_cast<double>(r.n_exploded) > 1e-3 * static_cast<double>(run.n_paths);
    if (r.n_paths < 2) throw NumericError(fmt::format("too many exploded paths at eps = {}", epsilon));
    for (std::size_t k = 0; k < steps; ++k) {
        column.clear();
        for (std::size_t p = 0; p < run.n_paths; ++p) {
            if (!exploded[p]) column.push_back(sq[k * run.n_paths + p]);
        }
        const auto m = stats::mean_se(column);
        if (m.mean > r.error) {
            r.error = m.mean;
            r.se = m.se;
        }
    }
    return r;
}

std::vector<RegularityRow> time_regularity_probe(const ModelSpec& model, std::span<const double> x0,
                                                 std::span<const double> y0, std::size_t levels,
                                                 const IntegratorConfig& cfg, const StrongErrorConfig& run) {
    const AveragedModel dummy = [&] {
        AveragedModel a;
        a.d1 = model.d1;
        return a;
    }();
    const CoupledSetup s = coupled_setup(model, dummy, x0, y0, model.scales.epsilon, cfg, run);
    if (levels < 1) throw ContractViolation("time_regularity_probe: need at least one level");
    const std::size_t steps = s.grid.steps;
    std::vector<std::size_t> lags;
    for (std::size_t l = 1; l <= levels; ++l) {
        const std::size_t lag = steps >> l;
        if (lag == 0) throw ContractViolation("time_regularity_probe: too many levels for the grid");
        lags.push_back(lag);
    }
    std::vector<double> vals(levels * run.n_paths);
    parallel_for(
        run.n_paths,
        [&](std::size_t p) {
            MultiscaleStepper ms(s.model, s.cfg, s.grid.dt, NoisePath{run.seed, p});
            ms.reset(x0, y0);
            Vector path(x0.begin(), x0.end());
            for (std::size_t k = 0; k < steps; ++k) {
                ms.step(k);
                path.insert(path.end(), ms.x().begin(), ms.x().end());
            }
            const std::size_t d1 = model.d1;
            for (std::size_t l = 0; l < levels; ++l) {
                const std::size_t lag = lags[l];
                double acc = 0.0;
                std::size_t cnt = 0;
                for (std::size_t i = 0; i + lag <= steps; i += lag, ++cnt) {
                    acc += sq_dist({path.data() + i * d1, d1}, {path.data() + (i + lag) * d1, d1});
                }
                vals[l * run.n_paths + p] = acc / static_cast<double>(cnt);
            }
        },
        run.threads);
    std::vector<RegularityRow> rows;
    for (std::size_t l = 0; l < levels; ++l) {
        const auto m = stats::mean_se(std::span<const double>(vals).subspan(l * run.n_paths, run.n_paths));
        const double lag = static_cast<double>(lags[l]) * s.grid.dt;
        rows.push_back({lag, m.mean, m.se, m.mean / lag});
    }
    return rows;
}

}  // namespace msde
