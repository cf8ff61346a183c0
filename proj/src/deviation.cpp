#include "msde/deviation.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

#include "msde/io.hpp"
#include "msde/parallel.hpp"
#include "msde/stats.hpp"

namespace msde {

PathBundle deviation_path(const PathBundle& x_eps, const PathBundle& x_bar, double epsilon) {
    if (!(epsilon > 0.0)) throw ContractViolation("deviation_path: epsilon must be positive");
    if (x_eps.t.size() != x_bar.t.size() || x_eps.d1 != x_bar.d1) {
        throw ContractViolation("deviation_path: bundles have different grids");
    }
    for (std::size_t k = 0; k < x_eps.t.size(); ++k) {
        if (std::abs(x_eps.t[k] - x_bar.t[k]) > 1e-12 * (1.0 + std::abs(x_eps.t[k]))) {
            throw ContractViolation(fmt::format("deviation_path: grids differ at index {}", k));
        }
    }
    PathBundle z;
    z.model_id = x_eps.model_id + "-deviation";
    z.epsilon = epsilon;
    z.seed = x_eps.seed;
    z.d1 = x_eps.d1;
    z.t = x_eps.t;
    z.x.resize(x_eps.x.size());
    const double scale = 1.0 / std::sqrt(epsilon);
    for (std::size_t i = 0; i < z.x.size(); ++i) z.x[i] = (x_eps.x[i] - x_bar.x[i]) * scale;
    return z;
}

std::string to_string(GMethod m) { return m == GMethod::Autocovariance ? "autocovariance" : "poisson-rep"; }

// G estimation --------------------------------------------------------------------

namespace {

constexpr std::uint64_t kAutocovSalt = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kPoissonSalt = 0xd1b54a32d192ed03ULL;

struct GSetup {
    double T_cut;
    std::size_t steps;
    double h;
};

GSetup g_setup(const ModelSpec& model, std::span<const double> x, std::span<const double> f_bar_x,
               const EmpiricalMeasure& mu_x, const GConfig& cfg) {
    require_dim(x.size(), model.d1, "estimate_G x");
    require_dim(f_bar_x.size(), model.d1, "estimate_G f_bar");
    require_dim(mu_x.dim, model.d2, "estimate_G measure");
    if (mu_x.empty()) throw ContractViolation("estimate_G: empty invariant measure");
    if (cfg.n_draws < 2) throw ContractViolation("estimate_G: need at least two draws");
    if (!(cfg.dt > 0.0)) throw ContractViolation("estimate_G: dt must be positive");
    const double eta = model.meta.require("eta");
    const double T = cfg.T_cut.value_or(15.0 / eta);
    if (T < 10.0 / eta * (1.0 - 1e-12)) {
        throw ContractViolation(fmt::format("T_cut = {} is below 10/eta = {}", T, 10.0 / eta));
    }
    const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(T / cfg.dt)));
    return {T, steps, T / static_cast<double>(steps)};
}

/// int_0^T (f(t, x, Y_s) - fbar) ds along one frozen path from y, trapezoid.
void integrate_centered(const ModelSpec& model, FastStepper& stepper, std::span<const double> x,
                        std::span<const double> y, std::span<const double> f_bar_x, const GSetup& s, double t,
                        const NoiseStream& w, bool antithetic, std::span<double> out) {
    const std::size_t d1 = model.d1;
    Vector yy(y.begin(), y.end()), fv(d1);
    std::fill(out.begin(), out.end(), 0.0);
    auto add = [&](double weight) {
        model.f(t, x, yy, fv);
        for (std::size_t c = 0; c < d1; ++c) out[c] += weight * (fv[c] - f_bar_x[c]);
    };
    add(0.5);
    for (std::size_t k = 0; k < s.steps; ++k) {
        stepper.step(yy, w, k, antithetic);
        add(k + 1 == s.steps ? 0.5 : 1.0);
    }
    for (double& v : out) v *= s.h;
}

GEstimate assemble(std::span<const double> x, GMethod method, const GSetup& s, std::size_t d1,
                   const std::vector<double>& per_draw, std::size_t n) {
    GEstimate g;
    g.x.assign(x.begin(), x.end());
    g.method = method;
    g.T_cut = s.T_cut;
    g.n_draws = n;
    Matrix mean(d1, d1), se(d1, d1);
    for (std::size_t e = 0; e < d1 * d1; ++e) {
        const auto ms = stats::mean_se(std::span<const double>(per_draw).subspan(e * n, n));
        mean.data()[e] = ms.mean;
        se.data()[e] = ms.se;
    }
    g.gg_t = Matrix(d1, d1);
    g.se = Matrix(d1, d1);
    double max_se = 0.0;
    for (std::size_t i = 0; i < d1; ++i) {
        for (std::size_t j = 0; j < d1; ++j) {
            g.gg_t(i, j) = 0.5 * (mean(i, j) + mean(j, i));
            g.se(i, j) = 0.5 * (se(i, j) + se(j, i));
            max_se = std::max(max_se, g.se(i, j));
        }
    }
    g.g = psd_sqrt(g.gg_t, 2.0 * max_se, &g.clipped_mass);
    g.clipped = g.clipped_mass > 0.0;
    if (g.clipped) {
        g.notes.push_back(fmt::format("negative eigenvalue mass {} clipped (within 2 se)", io::num(g.clipped_mass)));
    }
    return g;
}

}  // namespace

GEstimate estimate_G(const ModelSpec& model, std::span<const double> x, std::span<const double> f_bar_x,
                     const EmpiricalMeasure& mu_x, const GConfig& cfg) {
    const GSetup s = g_setup(model, x, f_bar_x, mu_x, cfg);
    const std::size_t d1 = model.d1, n = cfg.n_draws;
    std::vector<double> per_draw(d1 * d1 * n);
    parallel_for(
        n,
        [&](std::size_t i) {
            FastStepper stepper(model, Scheme::SemiImplicitFast, s.h, 1.0, 1.0, 0.0, 1.0);
            stepper.freeze(x);
            const auto y = mu_x.point(i % mu_x.size());
            const NoiseStream w = NoisePath{mix64(cfg.seed ^ kAutocovSalt), i}.channel(Channel::Frozen);
            Vector a(d1), b(d1, 0.0), f0(d1);
            integrate_centered(model, stepper, x, y, f_bar_x, s, cfg.t, w, false, a);
            if (cfg.antithetic) {
                integrate_centered(model, stepper, x, y, f_bar_x, s, cfg.t, w, true, b);
                for (std::size_t c = 0; c < d1; ++c) a[c] = 0.5 * (a[c] + b[c]);
            }
            model.f(cfg.t, x, y, f0);
            for (std::size_t r = 0; r < d1; ++r) {
                for (std::size_t c = 0; c < d1; ++c) {
                    per_draw[(r * d1 + c) * n + i] = a[r] * (f0[c] - f_bar_x[c]);
                }
            }
        },
        cfg.threads);
    GEstimate g = assemble(x, GMethod::Autocovariance, s, d1, per_draw, n);
    g.notes.push_back("gg_t is the one-sided time integral of the stationary autocovariance; "
                      "the covariance of the deviation limit is 2 sym(gg_t)");
    return g;
}

GEstimate estimate_G_poisson(const ModelSpec& model, std::span<const double> x, std::span<const double> f_bar_x,
                             const EmpiricalMeasure& mu_x, const GConfig& cfg) {
    const GSetup s = g_setup(model, x, f_bar_x, mu_x, cfg);
    if (cfg.inner_paths < 1) throw ContractViolation("estimate_G_poisson: inner_paths must be >= 1");
    const std::size_t d1 = model.d1, n = cfg.n_draws;
    std::vector<double> per_draw(d1 * d1 * n);
    parallel_for(
        n,
        [&](std::size_t i) {
            FastStepper stepper(model, Scheme::SemiImplicitFast, s.h, 1.0, 1.0, 0.0, 1.0);
            stepper.freeze(x);
            const auto y = mu_x.point(i % mu_x.size());
            Vector u(d1, 0.0), one(d1), f0(d1);
            for (std::size_t j = 0; j < cfg.inner_paths; ++j) {
                const NoiseStream w =
                    NoisePath{mix64(cfg.seed ^ kPoissonSalt), i * cfg.inner_paths + j}.channel(Channel::Frozen);
                integrate_centered(model, stepper, x, y, f_bar_x, s, cfg.t, w, false, one);
                for (std::size_t c = 0; c < d1; ++c) u[c] += one[c] / static_cast<double>(cfg.inner_paths);
            }
            model.f(cfg.t, x, y, f0);
            for (std::size_t r = 0; r < d1; ++r) {
                for (std::size_t c = 0; c < d1; ++c) {
                    per_draw[(r * d1 + c) * n + i] = (f0[r] - f_bar_x[r]) * u[c];
                }
            }
        },
        cfg.threads);
    GEstimate g = assemble(x, GMethod::PoissonRep, s, d1, per_draw, n);
    Matrix neg = g.gg_t;
    for (double& v : neg.data()) v = -v;
    g.opposite_sign = neg;
    g.notes.push_back("u solves L2 u = -(f - fbar); with psi solving L2 psi = f - fbar the same integral "
                      "has the opposite sign (reported in opposite_sign)");
    return g;
}

Matrix psd_sqrt(const Matrix& a, double clip_threshold, double* clipped_mass) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw ContractViolation("psd_sqrt: matrix must be square");
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) m(i, j) = 0.5 * (a(i, j) + a(j, i));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd ev = es.eigenvalues();
    double clipped = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        if (ev(k) < 0.0) {
            if (-ev(k) > clip_threshold) {
                throw NumericError(fmt::format("covariance estimate is not PSD: eigenvalue {} beyond clipping "
                                               "threshold {} (increase T_cut or the number of draws)",
                                               io::num(ev(k)), io::num(clip_threshold)));
            }
            clipped += -ev(k);
            ev(k) = 0.0;
        }
        ev(k) = std::sqrt(ev(k));
    }
    if (clipped_mass) *clipped_mass = clipped;
    const Eigen::MatrixXd r = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) out(i, j) = 0.5 * (r(i, j) + r(j, i));
    }
    return out;
}

Matrix limit_diffusion(const GEstimate& g, LimitConvention c) {
    if (c == LimitConvention::OneSided) return g.g;
    Matrix cov = g.gg_t;
    for (double& v : cov.data()) v *= 2.0;
    double max_se = 0.0;
    for (double v : g.se.data()) max_se = std::max(max_se, v);
    return psd_sqrt(cov, 4.0 * max_se);
}

void GEstimate::write_csv(std::ostream& os) const {
    os << "row,col,gg_t,se\n";
    for (std::size_t i = 0; i < gg_t.rows(); ++i) {
        for (std::size_t j = 0; j < gg_t.cols(); ++j) {
            os << i + 1 << ',' << j + 1 << ',' << io::num(gg_t(i, j)) << ',' << io::num(se(i, j)) << '\n';
        }
    }
}

std::string GEstimate::sidecar_json(std::uint64_t seed) const {
    nlohmann::ordered_json j;
    j["method"] = to_string(method);
    j["x"] = x;
    j["T_cut"] = T_cut;
    j["n_draws"] = n_draws;
    j["seed"] = seed;
    j["clipped"] = clipped;
    j["clipped_mass"] = clipped_mass;
    if (opposite_sign) j["opposite_sign_convention"] = Vector(opposite_sign->data().begin(), opposite_sign->data().end());
    j["notes"] = notes;
    return j.dump(2) + "\n";
}

// Gradient ------------------------------------------------------------------------

double default_fd_step(std::span<const double> x) { return 1e-4 * (1.0 + std::sqrt(norm2(x))); }

GradientCheck grad_f_bar(const AveragedModel& avg, std::span<const double> x, double h) {
    require_dim(x.size(), avg.d1, "grad_f_bar x");
    const double scale = std::sqrt(norm2(x));
    if (!(h > 0.0) || h < 1e3 * DBL_EPSILON * scale) {
        throw ContractViolation(fmt::format("grad_f_bar: step h = {} is below 1e3 * machine epsilon * |x| = {}",
                                            io::num(h), io::num(1e3 * DBL_EPSILON * scale)));
    }
    const std::size_t d = avg.d1;
    GradientCheck out;
    out.finite_difference = Matrix(d, d);
    Vector xp(x.begin(), x.end()), xm(x.begin(), x.end()), fp(d), fm(d);
    for (std::size_t j = 0; j < d; ++j) {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        avg.f_bar(xp, fp);
        avg.f_bar(xm, fm);
        for (std::size_t i = 0; i < d; ++i) out.finite_difference(i, j) = (fp[i] - fm[i]) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    if (avg.grad_f_bar) {
        out.value = Matrix(d, d);
        avg.grad_f_bar(x, out.value.data());
        double diff = 0.0;
        for (std::size_t e = 0; e < d * d; ++e) {
            diff = std::max(diff, std::abs(out.value.data()[e] - out.finite_difference.data()[e]));
        }
        out.max_abs_diff = diff;
    } else {
        out.value = out.finite_difference;
    }
    return out;
}

MatrixField constant_field(const Matrix& m) {
    return [m](std::span<const double>) { return m; };
}

MatrixField tabulated_field(Vector grid, std::vector<Matrix> values) {
    if (grid.size() < 2 || grid.size() != values.size()) {
        throw ContractViolation("tabulated_field: need >= 2 nodes with one matrix each");
    }
    return [grid = std::move(grid), values = std::move(values)](std::span<const double> x) {
        const double v = std::clamp(x[0], grid.front(), grid.back());
        const auto it = std::upper_bound(grid.begin(), grid.end(), v);
        const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - grid.begin()), grid.size() - 1);
        const std::size_t lo = hi - 1;
        const double w = (v - grid[lo]) / (grid[hi] - grid[lo]);
        Matrix out = values[lo];
        for (std::size_t e = 0; e < out.data().size(); ++e) {
            out.data()[e] = (1.0 - w) * values[lo].data()[e] + w * values[hi].data()[e];
        }
        return out;
    };
}

MatrixField gradient_field(const AveragedModel& avg) {
    return [avg](std::span<const double> x) { return grad_f_bar(avg, x, default_fd_step(x)).value; };
}

// Limit equation ------------------------------------------------------------------

namespace {

class LimitStepper {
public:
    LimitStepper(const AveragedModel& avg, const MatrixField& G, const MatrixField& grad, const IntegratorConfig& cfg,
                 double dt, const NoisePath& noise, std::uint64_t limit_stream)
        : G_(&G), grad_(&grad), dt_(dt), xbar_(avg, cfg, dt, noise),
          wt_(NoisePath{noise.seed, limit_stream}.channel(Channel::LimitW1)), z_(avg.d1, 0.0), next_(avg.d1),
          dw_(avg.d1) {
        if (limit_stream == noise.stream_id) {
            throw ContractViolation(fmt::format(
                "simulate_limit: the limit noise stream {} collides with the W1 stream", limit_stream));
        }
    }

    void reset(std::span<const double> x0) {
        xbar_.reset(x0);
        std::fill(z_.begin(), z_.end(), 0.0);
    }

    void step(std::size_t k) {
        const Matrix A = (*grad_)(xbar_.x());
        const Matrix S = (*G_)(xbar_.x());
        wt_.increments(k, dt_, dw_);
        const std::size_t d = z_.size();
        for (std::size_t i = 0; i < d; ++i) {
            double v = z_[i];
            for (std::size_t j = 0; j < d; ++j) v += dt_ * A(i, j) * z_[j] + S(i, j) * dw_[j];
            next_[i] = v;
        }
        for (double v : next_) {
            if (!std::isfinite(v)) throw NumericOverflow(fmt::format("limit path overflow at step {}", k), k, z_);
        }
        std::swap(z_, next_);
        xbar_.step(k);
    }

    [[nodiscard]] std::span<const double> x() const { return xbar_.x(); }
    [[nodiscard]] std::span<const double> z() const { return z_; }

private:
    const MatrixField* G_;
    const MatrixField* grad_;
    double dt_;
    AveragedStepper xbar_;
    NoiseStream wt_;
    Vector z_, next_, dw_;
};

/// Grid with horizon = times.back() whose nodes include every sample time.
struct AlignedGrid {
    TimeGrid grid;
    std::vector<std::size_t> marks;
};

AlignedGrid aligned_grid(std::span<const double> times, double dt_target) {
    if (times.empty()) throw ContractViolation("deviation sampling needs at least one time");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0) || (i > 0 && !(times[i] > times[i - 1]))) {
            throw ContractViolation("deviation sample times must be positive and increasing");
        }
    }
    const double horizon = times.back();
    std::size_t m = 0;
    for (std::size_t cand = 1; cand <= 100000 && m == 0; ++cand) {
        bool ok = true;
        for (double t : times) {
            const double r = t / horizon * static_cast<double>(cand);
            if (std::abs(r - std::round(r)) > 1e-9 * static_cast<double>(cand)) {
                ok = false;
                break;
            }
        }
        if (ok) m = cand;
    }
    if (m == 0) throw ContractViolation("deviation sample times are not commensurate with the horizon");
    const TimeGrid base = make_grid(horizon, dt_target);
    const std::size_t n = ((base.steps + m - 1) / m) * m;
    AlignedGrid a;
    a.grid = {n, horizon / static_cast<double>(n)};
    for (double t : times) a.marks.push_back(static_cast<std::size_t>(std::llround(t / a.grid.dt)));
    return a;
}

}  // namespace

PathBundle simulate_limit(const AveragedModel& avg, const MatrixField& G, const MatrixField& grad,
                          std::span<const double> x0, double horizon, const IntegratorConfig& cfg,
                          const NoisePath& noise, std::uint64_t limit_stream) {
    avg.validate();
    cfg.validate();
    const TimeGrid grid = make_grid(horizon, cfg.dt);
    LimitStepper st(avg, G, grad, cfg, grid.dt, noise, limit_stream);
    st.reset(x0);
    PathBundle out;
    out.model_id = avg.id + "-limit";
    out.seed = noise.seed;
    out.d1 = avg.d1;
    out.d2 = avg.d1;
    auto record = [&](std::size_t k) {
        out.t.push_back(static_cast<double>(k) * grid.dt);
        out.x.insert(out.x.end(), st.x().begin(), st.x().end());
        out.y.insert(out.y.end(), st.z().begin(), st.z().end());
    };
    record(0);
    for (std::size_t k = 0; k < grid.steps; ++k) {
        st.step(k);
        if ((k + 1) % cfg.record_stride == 0 || k + 1 == grid.steps) record(k + 1);
    }
    return out;
}

// Weak gap ------------------------------------------------------------------------

std::vector<TestFunction> default_test_functions(std::size_t d1, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<Vector> dirs;
    for (int k = 0; k < 3; ++k) {
        Vector v(d1);
        double n2 = 0.0;
        do {
            for (double& c : v) c = normal(rng);
            n2 = norm2(v);
        } while (n2 < 1e-12);
        for (double& c : v) c /= std::sqrt(n2);
        dirs.push_back(v);
    }
    const double scales[3] = {0.5, 1.0, 2.0};
    std::vector<TestFunction> out;
    for (int k = 0; k < 3; ++k) {
        Vector v = dirs[k];
        for (double& c : v) c *= scales[k];
        out.push_back({fmt::format("tanh_v{}", k + 1), [v](std::span<const double> z) { return std::tanh(dot(v, z)); }});
    }
    out.push_back({"gauss", [](std::span<const double> z) { return std::exp(-0.5 * norm2(z)); }});
    out.push_back({"sin_v1", [v = dirs[0]](std::span<const double> z) { return std::sin(dot(v, z)); }});
    return out;
}

DeviationReport weak_gap(const SampleSet& z_eps, const SampleSet& z_bar, const std::vector<TestFunction>& phis,
                         double epsilon) {
    if (z_eps.n_paths < 500 || z_bar.n_paths < 500) {
        throw ContractViolation(fmt::format("weak_gap needs >= 500 paths per side (have {} and {})", z_eps.n_paths,
                                            z_bar.n_paths));
    }
    if (z_eps.times != z_bar.times || z_eps.d1 != z_bar.d1) {
        throw ContractViolation("weak_gap: sample sets have different time grids or dimensions");
    }
    DeviationReport rep;
    rep.epsilon = epsilon;
    rep.sup_gap.assign(phis.size(), 0.0);
    rep.sup_gap_se.assign(phis.size(), 0.0);
    for (const auto& p : phis) rep.test_functions.push_back(p.tag);
    std::vector<double> a(z_eps.n_paths), b(z_bar.n_paths);
    for (std::size_t k = 0; k < z_eps.times.size(); ++k) {
        for (std::size_t f = 0; f < phis.size(); ++f) {
            for (std::size_t p = 0; p < z_eps.n_paths; ++p) a[p] = phis[f].phi(z_eps.at(k, p));
            for (std::size_t p = 0; p < z_bar.n_paths; ++p) b[p] = phis[f].phi(z_bar.at(k, p));
            const auto ma = stats::mean_se(a);
            const auto mb = stats::mean_se(b);
            const double se = std::sqrt(ma.se * ma.se + mb.se * mb.se);
            rep.rows.push_back({z_eps.times[k], phis[f].tag, ma.mean, mb.mean, se});
            const double gap = std::abs(ma.mean - mb.mean);
            if (gap > rep.sup_gap[f] || k == 0) {
                rep.sup_gap[f] = gap;
                rep.sup_gap_se[f] = se;
            }
        }
    }
    for (std::size_t f = 0; f < phis.size(); ++f) {
        if (f == 0 || rep.sup_gap[f] > rep.overall_gap) {
            rep.overall_gap = rep.sup_gap[f];
            rep.overall_se = rep.sup_gap_se[f];
        }
    }
    return rep;
}

void DeviationReport::write_csv(std::ostream& os) const {
    os << "t,phi,e_eps,e_bar,gap,se\n";
    for (const auto& r : rows) {
        os << io::num(r.t) << ',' << io::csv_field(r.tag) << ',' << io::num(r.e_eps) << ',' << io::num(r.e_bar)
           << ',' << io::num(std::abs(r.e_eps - r.e_bar)) << ',' << io::num(r.se) << '\n';
    }
}

std::string DeviationReport::sidecar_json(std::uint64_t seed) const {
    nlohmann::ordered_json j;
    j["epsilon"] = epsilon;
    j["test_functions"] = test_functions;
    j["sup_gap"] = sup_gap;
    j["sup_gap_se"] = sup_gap_se;
    j["overall_gap"] = overall_gap;
    j["overall_se"] = overall_se;
    j["seed"] = seed;
    j["warnings"] = warnings;
    return j.dump(2) + "\n";
}

SampleSet sample_deviation(const ModelSpec& model, const AveragedModel& avg, std::span<const double> x0,
                           std::span<const double> y0, double epsilon, const IntegratorConfig& cfg,
                           const DeviationRun& run) {
    if ((!model.traits.sigma_constant || !avg.sigma_constant) && !run.allow_nonconstant_sigma) {
        throw ContractViolation("the normal-deviation limit is established for constant sigma only; "
                                "pass the override to run outside that regime");
    }
    require_dim(x0.size(), model.d1, "sample_deviation x0");
    require_dim(y0.size(), model.d2, "sample_deviation y0");
    cfg.validate();
    const ModelSpec m = model.with_epsilon(epsilon);
    const AlignedGrid ag = aligned_grid(run.times, coupled_dt(m, cfg));
    IntegratorConfig c = cfg;
    c.dt = ag.grid.dt;
    check_fast_resolution(m, c, ag.grid.dt);

    SampleSet out;
    out.d1 = model.d1;
    out.n_paths = run.n_paths;
    out.times = run.times;
    out.values.assign(run.times.size() * run.n_paths * model.d1, 0.0);
    const double scale = 1.0 / std::sqrt(epsilon);
    parallel_for(
        run.n_paths,
        [&](std::size_t p) {
            const NoisePath noise{run.seed, p};
            MultiscaleStepper ms(m, c, ag.grid.dt, noise);
            AveragedStepper av(avg, c, ag.grid.dt, noise);
            ms.reset(x0, y0);
            av.reset(x0);
            std::size_t mark = 0;
            for (std::size_t k = 0; k < ag.grid.steps && mark < ag.marks.size(); ++k) {
                ms.step(k);
                av.step(k);
                while (mark < ag.marks.size() && ag.marks[mark] == k + 1) {
                    for (std::size_t i = 0; i < model.d1; ++i) {
                        out.values[(mark * run.n_paths + p) * model.d1 + i] = (ms.x()[i] - av.x()[i]) * scale;
                    }
                    ++mark;
                }
            }
        },
        run.threads);
    return out;
}

SampleSet sample_limit(const AveragedModel& avg, const MatrixField& G, const MatrixField& grad,
                       std::span<const double> x0, const IntegratorConfig& cfg, const DeviationRun& run) {
    require_dim(x0.size(), avg.d1, "sample_limit x0");
    cfg.validate();
    const AlignedGrid ag = aligned_grid(run.times, cfg.dt);
    SampleSet out;
    out.d1 = avg.d1;
    out.n_paths = run.n_paths;
    out.times = run.times;
    out.values.assign(run.times.size() * run.n_paths * avg.d1, 0.0);
    parallel_for(
        run.n_paths,
        [&](std::size_t p) {
            const NoisePath noise{run.seed, p};
            LimitStepper st(avg, G, grad, cfg, ag.grid.dt, noise, p + (std::uint64_t{1} << 40));
            st.reset(x0);
            std::size_t mark = 0;
            for (std::size_t k = 0; k < ag.grid.steps && mark < ag.marks.size(); ++k) {
                st.step(k);
                while (mark < ag.marks.size() && ag.marks[mark] == k + 1) {
                    for (std::size_t i = 0; i < avg.d1; ++i) {
                        out.values[(mark * run.n_paths + p) * avg.d1 + i] = st.z()[i];
                    }
                    ++mark;
                }
            }
        },
        run.threads);
    return out;
}

}  // namespace msde
