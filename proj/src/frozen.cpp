#include "msde/frozen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "msde/io.hpp"
#include "msde/parallel.hpp"
#include "msde/stats.hpp"

namespace msde {

// EmpiricalMeasure ------------------------------------------------------------

void EmpiricalMeasure::validate() const {
    if (points.size() != weights.size() * dim) {
        throw ContractViolation("EmpiricalMeasure: points and weights disagree in length");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ContractViolation("EmpiricalMeasure: negative or NaN weight");
        total += w;
    }
    if (!weights.empty() && std::abs(total - 1.0) > 1e-12) {
        throw ContractViolation(fmt::format("EmpiricalMeasure: weights sum to {} (expected 1)", total));
    }
    for (double v : points) {
        if (!std::isfinite(v)) throw ContractViolation("EmpiricalMeasure: non-finite point");
    }
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::size_t dim, Vector points) {
    if (dim == 0 || points.size() % dim != 0) throw ContractViolation("EmpiricalMeasure::uniform: bad shape");
    EmpiricalMeasure mu;
    mu.dim = dim;
    const std::size_t n = points.size() / dim;
    mu.points = std::move(points);
    mu.weights.assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
    return mu;
}

EmpiricalMeasure EmpiricalMeasure::dirac(std::span<const double> at) {
    return uniform(at.size(), Vector(at.begin(), at.end()));
}

void EmpiricalMeasure::write_csv(std::ostream& os) const {
    for (std::size_t j = 0; j < dim; ++j) os << "z_" << (j + 1) << ',';
    os << "weight\n";
    for (std::size_t i = 0; i < size(); ++i) {
        for (double v : point(i)) os << io::num(v) << ',';
        os << io::num(weights[i]) << '\n';
    }
}

// Frozen sampling --------------------------------------------------------------------

double FrozenSpec::resolved_burn_in(const ModelSpec& model) const {
    const double eta = model.meta.require("eta");
    const double minimum = 5.0 / eta;
    const double v = burn_in.value_or(minimum);
    if (v < minimum * (1.0 - 1e-12)) {
        throw ContractViolation(fmt::format("frozen burn_in {} is below 5/eta = {}", v, minimum));
    }
    return v;
}

double FrozenSpec::resolved_stride(const ModelSpec& model) const {
    if (sample_stride) {
        if (!(*sample_stride > 0.0)) throw ContractViolation("frozen sample_stride must be positive");
        return *sample_stride;
    }
    return 2.0 / model.meta.require("eta");
}

namespace {

std::size_t steps_for(double span, double dt) {
    return static_cast<std::size_t>(std::llround(span / dt));
}

FastStepper frozen_stepper(const ModelSpec& model, Scheme scheme, double dt, bool include_b) {
    return FastStepper(model, scheme, dt, 1.0, 1.0, include_b ? 1.0 : 0.0, 1.0);
}

std::string describe(std::span<const double> x) {
    std::string s = "(";
    for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + io::num(x[i]);
    return s + ")";
}

double fastest_frequency(const ModelSpec& model) {
    double w = 0.0;
    for (double f : model.forcing_frequencies) w = std::max(w, std::abs(f));
    return w;
}

/// Composite trapezoid of `integrand(s, out)` on [0, T] with an even number
/// of intervals; the Richardson gap compares against every other node.
template <class F>
Vector time_average(const ModelSpec& model, std::size_t width, double T, F&& integrand, TimeAverageInfo* info) {
    if (!(T > 0.0)) throw ContractViolation(fmt::format("averaging window must be positive (got {})", T));
    Vector value(width, 0.0);
    if (model.traits.time_independent || model.forcing_frequencies.empty()) {
        integrand(0.0, std::span<double>(value));
        if (info) *info = {1, 0.0};
        return value;
    }
    const double omega = fastest_frequency(model);
    const double periods = T * omega / (2.0 * std::numbers::pi);
    auto n = static_cast<std::size_t>(std::ceil(20.0 * periods));
    n = std::max<std::size_t>(n + (n % 2), 2);
    const double h = T / static_cast<double>(n);
    Vector fine(width, 0.0), coarse(width, 0.0), buf(width);
    for (std::size_t k = 0; k <= n; ++k) {
        integrand(static_cast<double>(k) * h, std::span<double>(buf));
        const double wf = (k == 0 || k == n) ? 0.5 : 1.0;
        for (std::size_t i = 0; i < width; ++i) fine[i] += wf * buf[i];
        if (k % 2 == 0) {
            for (std::size_t i = 0; i < width; ++i) coarse[i] += wf * buf[i];
        }
    }
    double gap = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
        value[i] = fine[i] * h / T;
        gap = std::max(gap, std::abs(value[i] - coarse[i] * 2.0 * h / T));
    }
    if (info) *info = {n + 1, gap};
    return value;
}

}  // namespace

EmpiricalMeasure sample_invariant(const ModelSpec& model, const FrozenSpec& spec, const NoisePath& noise) {
    if (spec.n_samples < 1) throw ContractViolation("sample_invariant: n_samples must be >= 1");
    require_dim(spec.x.size(), model.d1, "sample_invariant x");
    if (!(spec.dt > 0.0)) throw ContractViolation("sample_invariant: dt must be positive");
    const double burn = spec.resolved_burn_in(model);
    const double stride = spec.resolved_stride(model);
    const std::size_t burn_steps = steps_for(burn, spec.dt);
    const std::size_t stride_steps = std::max<std::size_t>(1, steps_for(stride, spec.dt));

    FastStepper stepper = frozen_stepper(model, spec.scheme, spec.dt, spec.include_b);
    stepper.freeze(spec.x);
    Vector y = spec.y0.empty() ? Vector(model.d2, 0.0) : spec.y0;
    require_dim(y.size(), model.d2, "sample_invariant y0");
    const NoiseStream w = noise.channel(Channel::Frozen);

    Vector pts;
    pts.reserve(spec.n_samples * model.d2);
    std::uint64_t k = 0;
    try {
        for (; k < burn_steps; ++k) stepper.step(y, w, k);
        for (std::size_t s = 0; s < spec.n_samples; ++s) {
            for (std::size_t j = 0; j < stride_steps; ++j, ++k) stepper.step(y, w, k);
            pts.insert(pts.end(), y.begin(), y.end());
        }
    } catch (const NumericOverflow& e) {
        throw NumericOverflow(fmt::format("frozen trajectory at x = {} exploded: {}", describe(spec.x), e.what()),
                              e.step(), e.last_finite_state());
    }
    return EmpiricalMeasure::uniform(model.d2, std::move(pts));
}

double moment(const EmpiricalMeasure& mu, int m) {
    if (m < 2 || m % 2 != 0) throw ContractViolation(fmt::format("moment order must be even and >= 2 (got {})", m));
    if (mu.empty()) throw ContractViolation("moment of an empty measure");
    Vector terms(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double r2 = norm2(mu.point(i));
        terms[i] = mu.weights[i] * std::pow(r2, m / 2);
    }
    return stats::pairwise_sum(terms);
}

Vector averaged_drift_hat(const ModelSpec& model, double t, std::span<const double> x,
                          const EmpiricalMeasure& mu_x) {
    require_dim(x.size(), model.d1, "averaged_drift_hat x");
    require_dim(mu_x.dim, model.d2, "averaged_drift_hat measure");
    if (mu_x.empty()) throw ContractViolation("averaged_drift_hat: empty measure");
    const std::size_t d1 = model.d1;
    std::vector<double> per(mu_x.size() * d1);
    Vector buf(d1);
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        model.f(t, x, mu_x.point(i), buf);
        for (std::size_t c = 0; c < d1; ++c) per[c * mu_x.size() + i] = mu_x.weights[i] * buf[c];
    }
    Vector out(d1);
    for (std::size_t c = 0; c < d1; ++c) {
        out[c] = stats::pairwise_sum(std::span<const double>(per).subspan(c * mu_x.size(), mu_x.size()));
    }
    return out;
}

Vector averaged_drift_bar(const ModelSpec& model, std::span<const double> x, double T_avg,
                          const EmpiricalMeasure& mu_x, TimeAverageInfo* info) {
    return time_average(
        model, model.d1, T_avg,
        [&](double s, std::span<double> out) {
            const Vector v = averaged_drift_hat(model, s, x, mu_x);
            std::copy(v.begin(), v.end(), out.begin());
        },
        info);
}

Matrix averaged_diffusion_bar(const ModelSpec& model, std::span<const double> x, double T_avg,
                              TimeAverageInfo* info) {
    require_dim(x.size(), model.d1, "averaged_diffusion_bar x");
    const std::size_t d1 = model.d1;
    const Vector v = time_average(
        model, d1 * d1, T_avg, [&](double s, std::span<double> out) { model.sigma(s, x, out); }, info);
    Matrix m(d1, d1);
    std::copy(v.begin(), v.end(), m.data().begin());
    return m;
}

PoissonEstimate poisson_solution_estimate(const ModelSpec& model, std::span<const double> x,
                                          std::span<const double> y, std::span<const double> f_bar_x,
                                          const PoissonConfig& cfg) {
    require_dim(x.size(), model.d1, "poisson x");
    require_dim(y.size(), model.d2, "poisson y");
    require_dim(f_bar_x.size(), model.d1, "poisson f_bar");
    if (cfg.n_paths == 0) throw ContractViolation("poisson_solution_estimate: n_paths must be positive");
    const double eta = model.meta.require("eta");
    const double T = cfg.T_cut.value_or(15.0 / eta);
    if (T < 10.0 / eta * (1.0 - 1e-12)) {
        throw ContractViolation(fmt::format("T_cut = {} is below 10/eta = {}", T, 10.0 / eta));
    }
    const std::size_t steps = std::max<std::size_t>(1, steps_for(T, cfg.dt));
    const double h = T / static_cast<double>(steps);
    const std::size_t d1 = model.d1;

    std::vector<double> integrals(cfg.n_paths * d1);
    parallel_for(
        cfg.n_paths,
        [&](std::size_t p) {
            FastStepper stepper = frozen_stepper(model, Scheme::SemiImplicitFast, h, false);
            stepper.freeze(x);
            const NoiseStream w = NoisePath{cfg.seed, p}.channel(Channel::Frozen);
            Vector yy(y.begin(), y.end()), fv(d1), acc(d1, 0.0);
            auto add = [&](double weight) {
                model.f(cfg.t, x, yy, fv);
                for (std::size_t c = 0; c < d1; ++c) acc[c] += weight * (fv[c] - f_bar_x[c]);
            };
            add(0.5);
            for (std::size_t k = 0; k < steps; ++k) {
                stepper.step(yy, w, k);
                add(k + 1 == steps ? 0.5 : 1.0);
            }
            for (std::size_t c = 0; c < d1; ++c) integrals[c * cfg.n_paths + p] = acc[c] * h;
        },
        cfg.threads);

    PoissonEstimate est;
    est.T_cut = T;
    est.tail_factor = std::exp(-eta * T / 2.0);
    est.n_paths = cfg.n_paths;
    for (std::size_t c = 0; c < d1; ++c) {
        const auto ms = stats::mean_se(std::span<const double>(integrals).subspan(c * cfg.n_paths, cfg.n_paths));
        est.value.push_back(ms.mean);
        est.se.push_back(ms.se);
    }
    return est;
}

std::vector<ContractionRow> contraction_probe(const ModelSpec& model, std::span<const double> x,
                                              std::span<const double> y1, std::span<const double> y2,
                                              std::span<const double> times, std::size_t n_pairs, double dt,
                                              std::uint64_t seed, unsigned threads) {
    require_dim(x.size(), model.d1, "contraction x");
    require_dim(y1.size(), model.d2, "contraction y1");
    require_dim(y2.size(), model.d2, "contraction y2");
    if (n_pairs < 2) throw ContractViolation("contraction_probe: need at least two pairs");
    if (!std::is_sorted(times.begin(), times.end()) || times.empty() || !(times.front() > 0.0)) {
        throw ContractViolation("contraction_probe: times must be positive and increasing");
    }
    const double eta = model.meta.require("eta");
    std::vector<std::size_t> marks;
    for (double t : times) marks.push_back(std::max<std::size_t>(1, steps_for(t, dt)));

    std::vector<double> sq(times.size() * n_pairs);
    parallel_for(
        n_pairs,
        [&](std::size_t p) {
            FastStepper a = frozen_stepper(model, Scheme::SemiImplicitFast, dt, false);
            FastStepper b = frozen_stepper(model, Scheme::SemiImplicitFast, dt, false);
            a.freeze(x);
            b.freeze(x);
            const NoiseStream w = NoisePath{seed, p}.channel(Channel::Frozen);
            Vector ya(y1.begin(), y1.end()), yb(y2.begin(), y2.end());
            std::size_t k = 0;
            for (std::size_t m = 0; m < marks.size(); ++m) {
                for (; k < marks[m]; ++k) {
                    a.step(ya, w, k);
                    b.step(yb, w, k);
                }
                double d = 0.0;
                for (std::size_t j = 0; j < ya.size(); ++j) d += (ya[j] - yb[j]) * (ya[j] - yb[j]);
                sq[m * n_pairs + p] = d;
            }
        },
        threads);

    double d0 = 0.0;
    for (std::size_t j = 0; j < y1.size(); ++j) d0 += (y1[j] - y2[j]) * (y1[j] - y2[j]);
    std::vector<ContractionRow> rows;
    for (std::size_t m = 0; m < times.size(); ++m) {
        const auto ms = stats::mean_se(std::span<const double>(sq).subspan(m * n_pairs, n_pairs));
        ContractionRow r;
        r.t = times[m];
        r.mean_sq = ms.mean;
        r.se = ms.se;
        r.envelope = d0 * std::exp(-eta * times[m]);
        r.pass = r.mean_sq <= r.envelope + 3.0 * r.se;
        rows.push_back(r);
    }
    return rows;
}

std::vector<ContinuityRow> parameter_continuity_probe(const ModelSpec& model, std::span<const double> x,
                                                      std::span<const double> deltas, double t,
                                                      std::size_t n_paths, double dt, std::uint64_t seed,
                                                      unsigned threads) {
    require_dim(x.size(), model.d1, "continuity x");
    if (n_paths < 2) throw ContractViolation("parameter_continuity_probe: need at least two paths");
    const std::size_t steps = std::max<std::size_t>(1, steps_for(t, dt));
    std::vector<ContinuityRow> rows;
    for (double delta : deltas) {
        if (!(delta > 0.0)) throw ContractViolation("parameter_continuity_probe: deltas must be positive");
        Vector x2(x.begin(), x.end());
        x2[0] += delta;
        std::vector<double> sq(n_paths);
        parallel_for(
            n_paths,
            [&](std::size_t p) {
                FastStepper a = frozen_stepper(model, Scheme::SemiImplicitFast, dt, false);
                FastStepper b = frozen_stepper(model, Scheme::SemiImplicitFast, dt, false);
                a.freeze(x);
                b.freeze(x2);
                const NoiseStream w = NoisePath{seed, p}.channel(Channel::Frozen);
                Vector ya(model.d2, 0.0), yb(model.d2, 0.0);
                for (std::size_t k = 0; k < steps; ++k) {
                    a.step(ya, w, k);
                    b.step(yb, w, k);
                }
                double d = 0.0;
                for (std::size_t j = 0; j < ya.size(); ++j) d += (ya[j] - yb[j]) * (ya[j] - yb[j]);
                sq[p] = d;
            },
            threads);
        const auto ms = stats::mean_se(sq);
        rows.push_back({delta, ms.mean, ms.se, ms.mean / (delta * delta)});
    }
    return rows;
}

}  // namespace msde
