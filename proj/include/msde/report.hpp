#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace msde {

enum class Metric { StrongSupSquare, StrongRms, WeakPhi, Dbl };

[[nodiscard]] std::string to_string(Metric m);

struct ConvergenceRow {
    double epsilon = 0.0;  // abscissa: eps for averaging sweeps, dt for scheme probes
    double error = 0.0;
    double se = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_exploded = 0;
};

struct RateFit {
    double slope = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n_used = 0;
    std::vector<std::string> warnings;
};

/// Log-log least squares of error against the abscissa. Rows with zero error
/// are dropped with a warning; at least three positive rows must remain.
[[nodiscard]] RateFit fit_rate(std::span<const ConvergenceRow> rows);

struct ConvergenceReport {
    Metric metric = Metric::StrongSupSquare;
    std::string abscissa = "epsilon";
    std::vector<ConvergenceRow> rows;
    std::optional<RateFit> fit;
    std::vector<std::string> warnings;
    std::vector<std::uint64_t> seeds;

    /// Abscissae strictly decreasing, errors nonnegative.
    void validate() const;
    /// Attaches fit_rate(rows) when at least three rows have positive error.
    void fit_if_possible();

    void write_csv(std::ostream& os) const;
    /// JSON sidecar with slope, interval, seeds, warnings and the config hash.
    [[nodiscard]] std::string sidecar_json(const std::string& config_hash) const;
};

}  // namespace msde
