#include "msde/dbl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>

namespace msde {

DblMethod parse_dbl_method(const std::string& name) {
    if (name == "lp-exact") return DblMethod::LpExact;
    if (name == "w1-1d") return DblMethod::W1OneD;
    throw ConfigError(fmt::format("unknown d_BL method '{}' (lp-exact, w1-1d)", name));
}

std::string to_string(DblMethod m) { return m == DblMethod::LpExact ? "lp-exact" : "w1-1d"; }

namespace {

/// Distinct support points with signed mass mu - nu, sorted lexicographically.
struct SignedSupport {
    std::size_t dim = 0;
    Vector points;
    Vector mass;

    [[nodiscard]] std::size_t size() const { return mass.size(); }
    [[nodiscard]] std::span<const double> at(std::size_t i) const { return {points.data() + i * dim, dim}; }
};

SignedSupport signed_support(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim != nu.dim) throw ContractViolation("d_BL: measures live in different dimensions");
    if (mu.empty() || nu.empty()) throw ContractViolation("d_BL: empty measure");
    mu.validate();
    nu.validate();
    const std::size_t d = mu.dim;
    std::vector<std::pair<std::span<const double>, double>> atoms;
    atoms.reserve(mu.size() + nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) atoms.emplace_back(mu.point(i), mu.weights[i]);
    for (std::size_t i = 0; i < nu.size(); ++i) atoms.emplace_back(nu.point(i), -nu.weights[i]);
    std::stable_sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) {
        return std::lexicographical_compare(a.first.begin(), a.first.end(), b.first.begin(), b.first.end());
    });
    SignedSupport s;
    s.dim = d;
    for (const auto& [p, m] : atoms) {
        if (!s.mass.empty() && std::equal(p.begin(), p.end(), s.points.end() - static_cast<std::ptrdiff_t>(d))) {
            s.mass.back() += m;
        } else {
            s.points.insert(s.points.end(), p.begin(), p.end());
            s.mass.push_back(m);
        }
    }
    return s;
}

/// Convex piecewise-linear function M + sum_L w (p - s)_+ + sum_R w (s - p)_+,
/// with every left breakpoint at or below every right breakpoint.
class SlopeTrick {
public:
    void add_right(double a, double w) {  // += w (s - a)_+
        if (left_.empty() || a >= left_.rbegin()->first) {
            right_.emplace(a, w);
            sum_r_ += w;
            return;
        }
        left_.emplace(a, w);
        sum_l_ += w;
        min_ -= w * a;
        double need = w;
        while (need > 0.0 && !left_.empty()) {
            auto it = std::prev(left_.end());
            const double take = std::min(it->second, need);
            min_ += take * it->first;
            right_.emplace(it->first, take);
            sum_r_ += take;
            sum_l_ -= take;
            it->second -= take;
            if (it->second <= 0.0) left_.erase(it);
            need -= take;
        }
    }

    void add_left(double a, double w) {  // += w (a - s)_+
        if (right_.empty() || a <= right_.begin()->first) {
            left_.emplace(a, w);
            sum_l_ += w;
            return;
        }
        right_.emplace(a, w);
        sum_r_ += w;
        min_ += w * a;
        double need = w;
        while (need > 0.0 && !right_.empty()) {
            auto it = right_.begin();
            const double take = std::min(it->second, need);
            min_ -= take * it->first;
            left_.emplace(it->first, take);
            sum_l_ += take;
            sum_r_ -= take;
            it->second -= take;
            if (it->second <= 0.0) right_.erase(it);
            need -= take;
        }
    }

    /// Infimal convolution with c|.|: slopes clamped to [-c, c].
    void clamp(double c) {
        const double tol = 1e-15 * (1.0 + c);
        while (sum_l_ - c > tol && !left_.empty()) {
            auto it = left_.begin();
            const double remove = std::min(it->second, sum_l_ - c);
            it->second -= remove;
            sum_l_ -= remove;
            if (it->second <= 0.0) left_.erase(it);
        }
        while (sum_r_ - c > tol && !right_.empty()) {
            auto it = std::prev(right_.end());
            const double remove = std::min(it->second, sum_r_ - c);
            it->second -= remove;
            sum_r_ -= remove;
            if (it->second <= 0.0) right_.erase(it);
        }
    }

    [[nodiscard]] double at(double s) const {
        double v = min_;
        for (const auto& [p, w] : left_) v += w * std::max(0.0, p - s);
        for (const auto& [p, w] : right_) v += w * std::max(0.0, s - p);
        return v;
    }

private:
    std::multimap<double, double> left_, right_;
    double sum_l_ = 0.0, sum_r_ = 0.0, min_ = 0.0;
};

/// Exact transport on the line under min(L d, 2c): the dual of a flow on the
/// path graph plus a hub joined to every point at cost c. With A_i the
/// cumulative signed mass and S_i the cumulative hub exchange,
///   minimize c sum |S_i - S_{i-1}| + L sum Delta_i |A_i - S_i|,  S_0 = S_n = 0.
double truncated_1d(const SignedSupport& s, double L, double c) {
    const std::size_t n = s.size();
    if (n < 2 || L <= 0.0 || c <= 0.0) return 0.0;
    SlopeTrick g;
    g.add_left(0.0, c);
    g.add_right(0.0, c);
    double A = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        A += s.mass[i];
        const double w = L * (s.points[i + 1] - s.points[i]);
        if (w > 0.0) {
            g.add_left(A, w);
            g.add_right(A, w);
        }
        g.clamp(c);
    }
    return std::max(0.0, g.at(0.0));
}

double euclid(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// Dense successive-shortest-path transportation solver with potentials.
double truncated_dense(const SignedSupport& s, double L, double c) {
    if (L <= 0.0 || c <= 0.0) return 0.0;
    std::vector<std::size_t> src, snk;
    Vector supply, demand;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.mass[i] > 0.0) {
            src.push_back(i);
            supply.push_back(s.mass[i]);
        } else if (s.mass[i] < 0.0) {
            snk.push_back(i);
            demand.push_back(-s.mass[i]);
        }
    }
    const std::size_t n = src.size(), m = snk.size();
    if (n == 0 || m == 0) return 0.0;
    Vector cost(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = std::min(L * euclid(s.at(src[i]), s.at(snk[j])), 2.0 * c);
    }
    Vector flow(n * m, 0.0), pot(n + m, 0.0), dist(n + m);
    std::vector<std::ptrdiff_t> parent(n + m);
    std::vector<char> done(n + m);
    const double inf = std::numeric_limits<double>::infinity();
    const double tol = 1e-14;
    double total = 0.0;
    for (;;) {
        double remaining = 0.0;
        for (double v : supply) remaining += v;
        if (remaining <= tol) break;
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (supply[i] > tol) dist[i] = 0.0;
        }
        std::ptrdiff_t target = -1;
        for (;;) {
            std::ptrdiff_t u = -1;
            for (std::size_t v = 0; v < n + m; ++v) {
                if (!done[v] && dist[v] < inf && (u < 0 || dist[v] < dist[static_cast<std::size_t>(u)])) {
                    u = static_cast<std::ptrdiff_t>(v);
                }
            }
            if (u < 0) break;
            const auto uu = static_cast<std::size_t>(u);
            done[uu] = 1;
            if (uu >= n && demand[uu - n] > tol) {
                target = u;
                break;
            }
            if (uu < n) {
                for (std::size_t j = 0; j < m; ++j) {
                    const double rc = cost[uu * m + j] + pot[uu] - pot[n + j];
                    const double nd = dist[uu] + std::max(0.0, rc);
                    if (!done[n + j] && nd < dist[n + j]) {
                        dist[n + j] = nd;
                        parent[n + j] = u;
                    }
                }
            } else {
                const std::size_t j = uu - n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (flow[i * m + j] <= tol) continue;
                    const double rc = -cost[i * m + j] + pot[uu] - pot[i];
                    const double nd = dist[uu] + std::max(0.0, rc);
                    if (!done[i] && nd < dist[i]) {
                        dist[i] = nd;
                        parent[i] = u;
                    }
                }
            }
        }
        if (target < 0) throw NumericError("d_BL: transport solver found no augmenting path");
        const double dt = dist[static_cast<std::size_t>(target)];
        for (std::size_t v = 0; v < n + m; ++v) pot[v] += std::min(dist[v], dt);
        // Bottleneck along the path.
        double push = demand[static_cast<std::size_t>(target) - n];
        std::ptrdiff_t v = target;
        while (parent[static_cast<std::size_t>(v)] >= 0) {
            const auto pv = static_cast<std::size_t>(parent[static_cast<std::size_t>(v)]);
            if (static_cast<std::size_t>(v) < n) {  // reverse edge sink pv -> source v
                push = std::min(push, flow[static_cast<std::size_t>(v) * m + (pv - n)]);
            }
            v = static_cast<std::ptrdiff_t>(pv);
        }
        push = std::min(push, supply[static_cast<std::size_t>(v)]);
        const auto start = static_cast<std::size_t>(v);
        v = target;
        while (parent[static_cast<std::size_t>(v)] >= 0) {
            const auto vv = static_cast<std::size_t>(v);
            const auto pv = static_cast<std::size_t>(parent[vv]);
            if (vv >= n) {
                flow[pv * m + (vv - n)] += push;
                total += push * cost[pv * m + (vv - n)];
            } else {
                flow[vv * m + (pv - n)] -= push;
                total -= push * cost[vv * m + (pv - n)];
            }
            v = static_cast<std::ptrdiff_t>(pv);
        }
        supply[start] -= push;
        demand[static_cast<std::size_t>(target) - n] -= push;
    }
    return std::max(0.0, total);
}

double truncated(const SignedSupport& s, double L, double c) {
    return s.dim == 1 ? truncated_1d(s, L, c) : truncated_dense(s, L, c);
}

}  // namespace

double truncated_transport(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double L, double c) {
    if (!(L >= 0.0) || !(c >= 0.0)) throw ContractViolation("truncated_transport: L and c must be nonnegative");
    const SignedSupport s = signed_support(mu, nu);
    if (s.dim > 1 && s.size() > kDblDenseLimit) {
        throw ContractViolation(fmt::format("combined support {} exceeds {} points; subsample the measures",
                                            s.size(), kDblDenseLimit));
    }
    return truncated(s, L, c);
}

double wasserstein1_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim != 1 || nu.dim != 1) throw ContractViolation("w1-1d requires one-dimensional measures");
    const SignedSupport s = signed_support(mu, nu);
    double A = 0.0, w = 0.0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        A += s.mass[i];
        w += std::abs(A) * (s.points[i + 1] - s.points[i]);
    }
    return w;
}

DblResult dbl_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, DblMethod method) {
    DblResult r;
    r.method = method;
    if (method == DblMethod::W1OneD) {
        r.value = wasserstein1_1d(mu, nu);
        r.upper_bound = true;
        r.support = signed_support(mu, nu).size();
        return r;
    }
    const SignedSupport s = signed_support(mu, nu);
    r.support = s.size();
    if (s.dim > 1 && s.size() > kDblDenseLimit) {
        throw ContractViolation(fmt::format("lp-exact: combined support {} exceeds {} points; subsample the "
                                            "measures or use w1-1d in one dimension",
                                            s.size(), kDblDenseLimit));
    }
    if (std::all_of(s.mass.begin(), s.mass.end(), [](double m) { return std::abs(m) <= 1e-15; })) {
        r.value = 0.0;
        return r;
    }
    // Golden-section search for the maximum of the concave map L -> T(L, 1 - L).
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = 1.0;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = truncated(s, x1, 1.0 - x1), f2 = truncated(s, x2, 1.0 - x2);
    while (b - a > 1e-11) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = truncated(s, x2, 1.0 - x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = truncated(s, x1, 1.0 - x1);
        }
    }
    r.value = f1 >= f2 ? f1 : f2;
    r.lipschitz = f1 >= f2 ? x1 : x2;
    if (r.value > 2.0 + 1e-9) throw NumericError(fmt::format("d_BL estimate {} exceeds the bound 2", r.value));
    return r;
}

}  // namespace msde
