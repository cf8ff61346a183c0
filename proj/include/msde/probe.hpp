#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msde/model.hpp"

namespace msde {

/// Structural assumptions that can be probed pointwise.
enum class Assumption { Hy1, Hy2, Hy3, Hx1, Hx5, Hx6 };

[[nodiscard]] Assumption parse_assumption(const std::string& name);
[[nodiscard]] std::string to_string(Assumption a);
[[nodiscard]] const std::vector<Assumption>& all_assumptions();

/// Point cloud over (t, x, y). Half the points come from a Halton sequence,
/// half from a seeded uniform generator. Pairwise conditions (Hy3, Hx6)
/// compare each point with its successor in the cloud.
struct ProbeSampler {
    std::size_t n_points = 10000;
    double lo = -5.0;
    double hi = 5.0;
    double t_lo = 0.0;
    double t_hi = 10.0;
    std::uint64_t seed = 1;
};

struct ProbeReport {
    Assumption which = Assumption::Hy1;
    std::size_t n_points = 0;
    std::size_t n_pass = 0;
    std::size_t n_fail = 0;
    double worst_margin = 0.0;  // max over points of lhs - rhs (<= 0 means satisfied)
    bool no_evidence = false;   // zero points evaluated
    std::optional<std::vector<double>> witness;  // (t, x..., y...[, x2..., y2...]) of the worst violation
    [[nodiscard]] bool passed() const { return n_fail == 0; }
};

/// Evaluates the defining inequality of `which` on the sampled cloud. A
/// falsification probe: a pass is evidence, not proof. Missing constants raise
/// ConfigError naming the absent symbol. Violations use a relative rounding
/// allowance of 1e-12 * (1 + |lhs| + |rhs|).
[[nodiscard]] ProbeReport probe_assumption(const ModelSpec& model, Assumption which,
                                           const ProbeSampler& sampler = {});

}  // namespace msde
