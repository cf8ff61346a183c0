#include "msde/longtime.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "msde/io.hpp"
#include "msde/parallel.hpp"
#include "msde/stats.hpp"

namespace msde {

void write_snapshots_csv(std::ostream& os, std::span<const LawSnapshot> snapshots) {
    const std::size_t d = snapshots.empty() ? 1 : snapshots.front().measure.dim;
    os << 't';
    for (std::size_t i = 1; i <= d; ++i) os << ",z_" << i;
    os << ",weight\n";
    for (const auto& s : snapshots) {
        require_dim(s.measure.dim, d, "snapshot dimension");
        for (std::size_t k = 0; k < s.measure.size(); ++k) {
            os << io::num(s.t);
            for (double v : s.measure.point(k)) os << ',' << io::num(v);
            os << ',' << io::num(s.measure.weights[k]) << '\n';
        }
    }
}

namespace {

double require_lambda1(const AveragedModel& avg) {
    if (!avg.lambda1 || !(*avg.lambda1 > 0.0)) {
        throw ConfigError(fmt::format("averaged model '{}' declares no dissipativity rate lambda1 > 0", avg.id));
    }
    return *avg.lambda1;
}

std::size_t steps_for(double span, double dt) {
    return static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
}

EmpiricalMeasure resample(const EmpiricalMeasure& mu, std::uint64_t key) {
    const std::size_t n = mu.size();
    Vector pts;
    pts.reserve(mu.points.size());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = mix64(key + i) % n;
        const auto p = mu.point(j);
        pts.insert(pts.end(), p.begin(), p.end());
    }
    return EmpiricalMeasure::uniform(mu.dim, std::move(pts));
}

}  // namespace

EmpiricalMeasure stationary_law(const AveragedModel& avg, const StationaryConfig& cfg, const NoisePath& noise) {
    avg.validate();
    const double lambda1 = require_lambda1(avg);
    if (!(cfg.dt > 0.0) || cfg.n_samples == 0) throw ContractViolation("stationary_law needs dt > 0 and samples");
    const double burn_in = cfg.burn_in.value_or(10.0 / lambda1);
    const double stride = cfg.stride.value_or(2.0 / lambda1);
    if (!(burn_in >= 0.0) || !(stride > 0.0)) throw ContractViolation("stationary_law: invalid burn-in or stride");
    const Vector x0 = cfg.x0.empty() ? Vector(avg.d1, 0.0) : cfg.x0;
    require_dim(x0.size(), avg.d1, "stationary x0");

    const std::size_t burn_steps = steps_for(burn_in, cfg.dt);
    const std::size_t stride_steps = std::max<std::size_t>(1, steps_for(stride, cfg.dt));
    AveragedStepper stepper(avg, cfg.integrator, cfg.dt, noise);
    stepper.reset(x0);
    std::size_t k = 0;
    for (; k < burn_steps; ++k) stepper.step(k);
    Vector pts;
    pts.reserve(cfg.n_samples * avg.d1);
    for (std::size_t s = 0; s < cfg.n_samples; ++s) {
        for (std::size_t j = 0; j < stride_steps; ++j, ++k) stepper.step(k);
        pts.insert(pts.end(), stepper.x().begin(), stepper.x().end());
    }
    return EmpiricalMeasure::uniform(avg.d1, std::move(pts));
}

double dbl_bootstrap_se(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, std::size_t B, std::uint64_t seed,
                        DblMethod method) {
    if (B < 2) throw ContractViolation("bootstrap needs at least two resamples");
    Vector values(B);
    for (std::size_t b = 0; b < B; ++b) {
        const std::uint64_t key = mix64(seed ^ mix64(b + 1));
        values[b] = dbl_distance(resample(mu, key), resample(nu, mix64(key + 0x9e3779b97f4a7c15ULL)), method).value;
    }
    return stats::mean_se(values).sd;
}

void QuasiPeriodicResult::write_gap_csv(std::ostream& os) const {
    os << "epsilon,t,dbl\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.times.size(); ++i) {
            os << io::num(r.epsilon) << ',' << io::num(r.times[i]) << ',' << io::num(r.gap_by_t[i]) << '\n';
        }
    }
}

namespace {

void check_quasi_periodic_preconditions(const ModelSpec& model, const AveragedModel& avg) {
    if (!model.meta.flag("hx6")) {
        throw ConfigError(fmt::format("model '{}' does not declare the joint monotonicity assumption Hx6 "
                                      "(flag hx6); the quasi-periodic limit is not available",
                                      model.id));
    }
    if (!model.traits.fast_independent_of_x) {
        throw ConfigError(fmt::format("model '{}': quasi-periodic sweep requires B and g independent of x",
                                      model.id));
    }
    const auto& s = model.scales;
    if (s.beta > s.alpha) {
        throw ConfigError(fmt::format("model '{}': quasi-periodic sweep requires beta <= alpha", model.id));
    }
    if (s.beta == s.alpha) {
        const double lambda1 = require_lambda1(avg);
        const double lb = model.meta.require("L_b");
        const double eta = model.meta.require("eta");
        if (!(lambda1 > lb * lb / eta)) {
            throw ConfigError(fmt::format("model '{}': beta = alpha requires lambda1 > L_b^2 / eta ({} <= {})",
                                          model.id, io::num(lambda1), io::num(lb * lb / eta)));
        }
    }
    require_dim(avg.d1, model.d1, "averaged model dimension");
}

}  // namespace

QuasiPeriodicResult quasi_periodic_sweep(const ModelSpec& model, const AveragedModel& avg,
                                         std::span<const double> eps_list, const QuasiPeriodicConfig& cfg) {
    model.validate();
    avg.validate();
    cfg.integrator.validate();
    check_quasi_periodic_preconditions(model, avg);
    const double lambda1 = require_lambda1(avg);
    if (eps_list.empty()) throw ContractViolation("quasi_periodic_sweep: empty eps list");
    if (cfg.n_times < 1 || cfg.n_paths < 2 || !(cfg.cycles > 0.0)) {
        throw ContractViolation("quasi_periodic_sweep needs n_times >= 1, n_paths >= 2 and cycles > 0");
    }
    const Vector x0 = cfg.x0.empty() ? Vector(model.d1, 0.0) : cfg.x0;
    const Vector y0 = cfg.y0.empty() ? Vector(model.d2, 0.0) : cfg.y0;
    require_dim(x0.size(), model.d1, "sweep x0");
    require_dim(y0.size(), model.d2, "sweep y0");
    const double pre_run = cfg.pre_run.value_or(10.0 / lambda1);

    QuasiPeriodicResult out;
    out.report.metric = Metric::Dbl;
    out.report.abscissa = "epsilon";
    out.report.seeds = {cfg.seed};

    // Reference law and its sampling floor, shared by every eps.
    const std::uint64_t ref_stream = std::uint64_t{1} << 41;
    const EmpiricalMeasure reference = stationary_law(avg, cfg.stationary, NoisePath{cfg.seed, ref_stream});
    StationaryConfig floor_cfg = cfg.stationary;
    floor_cfg.n_samples = cfg.n_paths;
    const EmpiricalMeasure floor_sample = stationary_law(avg, floor_cfg, NoisePath{cfg.seed, ref_stream + 1});
    const double noise_floor = dbl_distance(floor_sample, reference, cfg.method).value;

    for (double eps : eps_list) {
        const ModelSpec m = model.with_epsilon(eps);
        IntegratorConfig icfg = cfg.integrator;
        icfg.dt = coupled_dt(m, cfg.integrator);
        const double dt = icfg.dt;

        double window = 0.0;
        if (cfg.window) {
            window = *cfg.window;
        } else if (!m.forcing_frequencies.empty()) {
            const double w_min = *std::min_element(m.forcing_frequencies.begin(), m.forcing_frequencies.end());
            window = cfg.cycles * 2.0 * std::numbers::pi * std::pow(eps, m.scales.gamma) / w_min;
        } else {
            window = 1.0 / lambda1;
        }
        const std::size_t pre_steps = steps_for(pre_run, dt);
        const std::size_t gap_steps =
            cfg.n_times > 1 ? std::max<std::size_t>(1, steps_for(window / static_cast<double>(cfg.n_times - 1), dt))
                            : 0;
        const std::size_t total = pre_steps + gap_steps * (cfg.n_times - 1);

        const std::size_t d1 = m.d1;
        std::vector<double> snaps(cfg.n_times * cfg.n_paths * d1, 0.0);
        std::vector<char> exploded(cfg.n_paths, 0);
        parallel_for(
            cfg.n_paths,
            [&](std::size_t p) {
                MultiscaleStepper ms(m, icfg, dt, NoisePath{cfg.seed, p});
                ms.reset(x0, y0);
                try {
                    std::size_t next = 0;
                    for (std::size_t k = 0; k <= total; ++k) {
                        if (k == pre_steps + next * gap_steps && next < cfg.n_times) {
                            std::copy(ms.x().begin(), ms.x().end(), snaps.begin() + (next * cfg.n_paths + p) * d1);
                            ++next;
                        }
                        if (k < total) ms.step(k);
                    }
                } catch (const NumericOverflow&) {
                    exploded[p] = 1;
                }
            },
            cfg.threads);

        QuasiPeriodicRow row;
        row.epsilon = eps;
        row.window = static_cast<double>(gap_steps * (cfg.n_times - 1)) * dt;
        row.noise_floor = noise_floor;
        row.n_exploded = static_cast<std::size_t>(std::count(exploded.begin(), exploded.end(), 1));
        row.n_paths = cfg.n_paths - row.n_exploded;
        if (row.n_paths < 2) throw NumericError(fmt::format("too many exploded paths at eps = {}", eps));

        std::vector<EmpiricalMeasure> laws(cfg.n_times);
        for (std::size_t j = 0; j < cfg.n_times; ++j) {
            Vector pts;
            pts.reserve(row.n_paths * d1);
            for (std::size_t p = 0; p < cfg.n_paths; ++p) {
                if (exploded[p]) continue;
                const auto first = snaps.begin() + static_cast<std::ptrdiff_t>((j * cfg.n_paths + p) * d1);
                pts.insert(pts.end(), first, first + static_cast<std::ptrdiff_t>(d1));
            }
            laws[j] = EmpiricalMeasure::uniform(d1, std::move(pts));
            row.times.push_back(static_cast<double>(pre_steps + j * gap_steps) * dt);
        }
        row.gap_by_t.assign(cfg.n_times, 0.0);
        parallel_for(
            cfg.n_times, [&](std::size_t j) { row.gap_by_t[j] = dbl_distance(laws[j], reference, cfg.method).value; },
            cfg.threads);
        const auto best = static_cast<std::size_t>(
            std::max_element(row.gap_by_t.begin(), row.gap_by_t.end()) - row.gap_by_t.begin());
        row.gap = row.gap_by_t[best];
        row.argmax_t = row.times[best];
        row.se = cfg.bootstrap >= 2 ? dbl_bootstrap_se(laws[best], reference, cfg.bootstrap,
                                                       mix64(cfg.seed ^ std::bit_cast<std::uint64_t>(eps)), cfg.method)
                                    : 0.0;
        if (static_cast<double>(row.n_exploded) > 1e-3 * static_cast<double>(cfg.n_paths)) {
            out.report.warnings.push_back(
                fmt::format("eps = {}: {} of {} paths exploded", io::num(eps), row.n_exploded, cfg.n_paths));
        }
        out.report.rows.push_back({eps, row.gap, row.se, row.n_paths, row.n_exploded});
        out.rows.push_back(std::move(row));
    }
    out.report.validate();
    if (out.rows.size() == 1) {
        out.report.warnings.push_back("single epsilon: no trend claim");
    } else {
        out.report.fit_if_possible();
    }
    return out;
}

}  // namespace msde
