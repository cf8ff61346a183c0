#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "msde/averaging.hpp"
#include "msde/dbl.hpp"
#include "msde/frozen.hpp"
#include "msde/report.hpp"

namespace msde {

/// Law of the slow component at time t.
struct LawSnapshot {
    double t = 0.0;
    EmpiricalMeasure measure;
};

/// Columns t,z_1..z_d,weight; one row per atom of every snapshot.
void write_snapshots_csv(std::ostream& os, std::span<const LawSnapshot> snapshots);

struct StationaryConfig {
    Vector x0;                       // empty: origin
    std::optional<double> burn_in;   // default 10 / lambda1
    std::optional<double> stride;    // default 2 / lambda1
    std::size_t n_samples = 4000;
    double dt = 1e-3;
    IntegratorConfig integrator;     // scheme and taming; dt is taken from this struct's dt
};

/// Empirical law of one long trajectory of the averaged equation after
/// burn-in, sampled every stride, driven by the SlowW1 channel of `noise`.
/// Requires avg.lambda1; explosion raises NumericError.
[[nodiscard]] EmpiricalMeasure stationary_law(const AveragedModel& avg, const StationaryConfig& cfg,
                                              const NoisePath& noise);

/// Bootstrap standard deviation of dbl_distance over B resamples of both
/// measures (uniform weights assumed).
[[nodiscard]] double dbl_bootstrap_se(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, std::size_t B,
                                      std::uint64_t seed, DblMethod method = DblMethod::LpExact);

struct QuasiPeriodicConfig {
    Vector x0;                     // empty: origin
    Vector y0;                     // empty: origin
    std::optional<double> pre_run; // default 10 / lambda1
    std::optional<double> window;  // default cycles * 2 pi eps^gamma / min frequency
    double cycles = 4.0;
    std::size_t n_times = 32;
    std::size_t n_paths = 2000;
    StationaryConfig stationary;
    std::size_t bootstrap = 20;
    DblMethod method = DblMethod::LpExact;
    IntegratorConfig integrator;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

struct QuasiPeriodicRow {
    double epsilon = 0.0;
    double gap = 0.0;          // max_t d_BL(law of X^eps_t, stationary law)
    double se = 0.0;           // bootstrap SE at the argmax
    double argmax_t = 0.0;
    double noise_floor = 0.0;  // d_BL between two independent stationary samples
    double window = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_exploded = 0;
    std::vector<double> times;
    std::vector<double> gap_by_t;
};

struct QuasiPeriodicResult {
    std::vector<QuasiPeriodicRow> rows;
    ConvergenceReport report;  // metric dbl

    /// Columns epsilon,t,dbl.
    void write_gap_csv(std::ostream& os) const;
};

/// For each eps (strictly decreasing): n_paths of the full system are run for
/// a pre-run absorbing the initial condition, then the law of X^eps is
/// snapshotted on n_times points of one window and compared to the averaged
/// stationary law. Refuses models without the hx6 flag, with x-dependent
/// fast coefficients, or outside beta < alpha (or beta = alpha with
/// lambda1 > L_b^2 / eta).
[[nodiscard]] QuasiPeriodicResult quasi_periodic_sweep(const ModelSpec& model, const AveragedModel& avg,
                                                       std::span<const double> eps_list,
                                                       const QuasiPeriodicConfig& cfg);

}  // namespace msde
