#include "msde/probe.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace msde {

namespace {

constexpr double kRoundingAllowance = 1e-12;

double halton(std::uint64_t index, unsigned base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

/// Cloud rows are (t, x_1..x_d1, y_1..y_d2).
std::vector<std::vector<double>> make_cloud(const ProbeSampler& s, std::size_t d1, std::size_t d2) {
    const std::size_t dim = 1 + d1 + d2;
    std::vector<std::vector<double>> pts;
    pts.reserve(s.n_points);
    const std::size_t n_halton = s.n_points / 2;
    auto scale = [&](std::size_t k, double u) {
        return k == 0 ? s.t_lo + (s.t_hi - s.t_lo) * u : s.lo + (s.hi - s.lo) * u;
    };
    for (std::size_t i = 0; i < n_halton; ++i) {
        std::vector<double> p(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            const unsigned base = kPrimes[k % std::size(kPrimes)];
            p[k] = scale(k, halton(i + 1, base));
        }
        pts.push_back(std::move(p));
    }
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = n_halton; i < s.n_points; ++i) {
        std::vector<double> p(dim);
        for (std::size_t k = 0; k < dim; ++k) p[k] = scale(k, unif(rng));
        pts.push_back(std::move(p));
    }
    return pts;
}

double hs2(std::span<const double> m) {
    double s = 0.0;
    for (double v : m) s += v * v;
    return s;
}

}  // namespace

Assumption parse_assumption(const std::string& name) {
    for (Assumption a : all_assumptions()) {
        if (to_string(a) == name) return a;
    }
    throw ConfigError(fmt::format("unknown assumption '{}' (expected Hy1, Hy2, Hy3, Hx1, Hx5 or Hx6)", name));
}

std::string to_string(Assumption a) {
    switch (a) {
        case Assumption::Hy1: return "Hy1";
        case Assumption::Hy2: return "Hy2";
        case Assumption::Hy3: return "Hy3";
        case Assumption::Hx1: return "Hx1";
        case Assumption::Hx5: return "Hx5";
        case Assumption::Hx6: return "Hx6";
    }
    return "?";
}

const std::vector<Assumption>& all_assumptions() {
    static const std::vector<Assumption> all{Assumption::Hy1, Assumption::Hy2, Assumption::Hy3,
                                             Assumption::Hx1, Assumption::Hx5, Assumption::Hx6};
    return all;
}

ProbeReport probe_assumption(const ModelSpec& model, Assumption which, const ProbeSampler& sampler) {
    const auto& meta = model.meta;
    const std::size_t d1 = model.d1, d2 = model.d2;

    // Resolve constants first so a missing symbol is reported even for an
    // empty cloud.
    double eta = 0, eta_prime = 0, theta = 2, K1 = 0, K2 = 1, K4 = 0, K5 = 0, lambda1 = 0, lambda2 = 0;
    std::optional<double> eta_tilde;
    switch (which) {
        case Assumption::Hy1:
            eta = meta.require("eta");
            eta_prime = meta.require("eta_prime");
            theta = meta.require("theta");
            K1 = meta.require("K1");
            eta_tilde = meta.get("eta_tilde");
            break;
        case Assumption::Hy2: K2 = meta.require("K2"); break;
        case Assumption::Hy3: eta = meta.require("eta"); break;
        case Assumption::Hx1:
            K4 = meta.require("K4");
            K5 = meta.require("K5");
            theta = meta.require("theta");
            break;
        case Assumption::Hx5:
            lambda1 = meta.require("lambda1");
            K4 = meta.require("K4");
            K5 = meta.require("K5");
            theta = meta.require("theta");
            break;
        case Assumption::Hx6:
            lambda1 = meta.require("lambda1");
            lambda2 = meta.require("lambda2");
            break;
    }

    ProbeReport rep;
    rep.which = which;
    rep.worst_margin = -std::numeric_limits<double>::infinity();
    if (sampler.n_points == 0) {
        rep.no_evidence = true;
        rep.worst_margin = 0.0;
        return rep;
    }
    const auto cloud = make_cloud(sampler, d1, d2);

    Vector v1(std::max(d1, d2)), v2(std::max(d1, d2));
    Vector m1(std::max(d1 * d1, d2 * d2)), m2(std::max(d1 * d1, d2 * d2));
    std::vector<double> worst_point;

    auto record = [&](double lhs, double rhs, const std::vector<double>& witness) {
        const double margin = lhs - rhs;
        const bool fail = margin > kRoundingAllowance * (1.0 + std::abs(lhs) + std::abs(rhs));
        ++rep.n_points;
        if (fail) {
            ++rep.n_fail;
        } else {
            ++rep.n_pass;
        }
        if (margin > rep.worst_margin) {
            rep.worst_margin = margin;
            worst_point = witness;
        }
    };

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud[i];
        const auto& q = cloud[(i + 1) % cloud.size()];
        const double t = p[0];
        std::span<const double> x(p.data() + 1, d1), y(p.data() + 1 + d1, d2);
        std::span<const double> x2(q.data() + 1, d1), y2(q.data() + 1 + d1, d2);
        const double ny2 = norm2(y);
        const double nx2 = norm2(x);

        switch (which) {
            case Assumption::Hy1: {
                std::span<double> Bv(v1.data(), d2), gv(m1.data(), d2 * d2);
                model.B(x, y, Bv);
                model.g(x, y, gv);
                const double lhs = 2.0 * dot(Bv, y) + hs2(gv);
                const double rhs = -eta * ny2 - eta_prime * std::pow(std::sqrt(ny2), theta) + K1;
                record(lhs, rhs, p);
                if (eta_tilde && model.traits.has_b) {
                    std::span<double> bv(v2.data(), d2);
                    model.b(x, y, bv);
                    record(2.0 * dot(bv, y), *eta_tilde * ny2 + K1, p);
                }
                break;
            }
            case Assumption::Hy2: {
                std::span<double> gv(m1.data(), d2 * d2);
                model.g(x, y, gv);
                Eigen::MatrixXd G = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                                   Eigen::RowMajor>>(gv.data(), d2, d2);
                const Eigen::MatrixXd a = 0.5 * G * G.transpose();
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
                const double lo = es.eigenvalues().minCoeff();
                const double hi = es.eigenvalues().maxCoeff();
                record(std::max(1.0 / K2 - lo, hi - K2), 0.0, p);
                break;
            }
            case Assumption::Hy3: {
                std::span<double> B1(v1.data(), d2), B2(v2.data(), d2);
                std::span<double> g1(m1.data(), d2 * d2), g2(m2.data(), d2 * d2);
                model.B(x, y, B1);
                model.B(x, y2, B2);
                model.g(x, y, g1);
                model.g(x, y2, g2);
                double inner = 0.0, dy2 = 0.0, dg = 0.0;
                for (std::size_t k = 0; k < d2; ++k) {
                    const double dy = y[k] - y2[k];
                    inner += (B1[k] - B2[k]) * dy;
                    dy2 += dy * dy;
                }
                for (std::size_t k = 0; k < d2 * d2; ++k) dg += (g1[k] - g2[k]) * (g1[k] - g2[k]);
                std::vector<double> w(p);
                w.insert(w.end(), y2.begin(), y2.end());
                record(2.0 * inner + dg, -eta * dy2, w);
                break;
            }
            case Assumption::Hx1:
            case Assumption::Hx5: {
                std::span<double> fv(v1.data(), d1), sv(m1.data(), d1 * d1);
                model.f(t, x, y, fv);
                model.sigma(t, x, sv);
                const double lhs = 2.0 * dot(fv, x) + hs2(sv);
                const double ytheta = std::pow(std::sqrt(ny2), theta);
                const double rhs = which == Assumption::Hx1 ? K4 * (1.0 + nx2) + K5 * ytheta
                                                            : -lambda1 * nx2 + K5 * ytheta + K4;
                record(lhs, rhs, p);
                break;
            }
            case Assumption::Hx6: {
                std::span<double> f1(v1.data(), d1), f2(v2.data(), d1);
                std::span<double> s1(m1.data(), d1 * d1), s2(m2.data(), d1 * d1);
                model.f(t, x, y, f1);
                model.f(t, x2, y2, f2);
                model.sigma(t, x, s1);
                model.sigma(t, x2, s2);
                double inner = 0.0, dx2 = 0.0, dy2 = 0.0, ds = 0.0;
                for (std::size_t k = 0; k < d1; ++k) {
                    const double dx = x[k] - x2[k];
                    inner += (f1[k] - f2[k]) * dx;
                    dx2 += dx * dx;
                }
                for (std::size_t k = 0; k < d2; ++k) dy2 += (y[k] - y2[k]) * (y[k] - y2[k]);
                for (std::size_t k = 0; k < d1 * d1; ++k) ds += (s1[k] - s2[k]) * (s1[k] - s2[k]);
                std::vector<double> w(p);
                w.insert(w.end(), q.begin() + 1, q.end());
                record(2.0 * inner + ds, -lambda1 * dx2 + lambda2 * dy2, w);
                break;
            }
        }
    }
    if (rep.n_fail > 0) rep.witness = worst_point;
    return rep;
}

}  // namespace msde
