#pragma once

#include <string>

#include "msde/frozen.hpp"

namespace msde {

enum class DblMethod { LpExact, W1OneD };

[[nodiscard]] DblMethod parse_dbl_method(const std::string& name);
[[nodiscard]] std::string to_string(DblMethod m);

struct DblResult {
    double value = 0.0;
    DblMethod method = DblMethod::LpExact;
    bool upper_bound = false;  // w1-1d reports W1 >= d_BL
    double lipschitz = 0.0;    // optimal L in the split L + c = 1 (lp-exact)
    std::size_t support = 0;   // distinct support points
};

/// Largest combined support accepted by lp-exact in dimension > 1.
inline constexpr std::size_t kDblDenseLimit = 2000;

/// Bounded-Lipschitz distance sup { |int f dmu - int f dnu| : Lip(f) + sup|f| <= 1 }.
/// lp-exact: for each split (L, c = 1 - L) the inner maximum is the optimal
/// transport cost under min(L |z - z'|, 2c), concave in L and maximized by
/// golden-section search. 1d uses an exact O(n log n) solver; d > 1 uses dense
/// min-cost flow limited to kDblDenseLimit support points.
/// w1-1d: sorted-sample Wasserstein-1 (d = 1 only), an upper bound.
[[nodiscard]] DblResult dbl_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                     DblMethod method = DblMethod::LpExact);

/// Optimal transport cost between mu and nu under min(L |z - z'|, 2c).
[[nodiscard]] double truncated_transport(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double L,
                                         double c);

/// Wasserstein-1 distance between 1d measures.
[[nodiscard]] double wasserstein1_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

}  // namespace msde
