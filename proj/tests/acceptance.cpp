// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. `msde_acceptance 3 7` runs a subset.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "msde/averaging.hpp"
#include "msde/config.hpp"
#include "msde/dbl.hpp"
#include "msde/deviation.hpp"
#include "msde/frozen.hpp"
#include "msde/integrators.hpp"
#include "msde/io.hpp"
#include "msde/longtime.hpp"
#include "msde/stats.hpp"

#ifndef MSDE_CLI_PATH
#error "MSDE_CLI_PATH must point at the msde executable"
#endif

namespace fs = std::filesystem;
using namespace msde;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::uint64_t kSeed = 20240601;

double combined(double a, double b) { return std::sqrt(a * a + b * b); }

/// Simpson moment of exp(-V) on [-R, R], normalized.
template <class V>
double simpson_moment(V potential, int m, double R = 8.0, std::size_t n = 16000) {
    const double h = 2.0 * R / static_cast<double>(n);
    double z = 0.0, s = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double y = -R + h * static_cast<double>(i);
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double p = std::exp(-potential(y));
        z += w * p;
        s += w * p * std::pow(y, m);
    }
    return s / z;
}

// 1. Strong averaging rate on Example 5.1 --------------------------------------------
Verdict strong_rate() {
    const std::vector<double> eps{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256, 1.0 / 512};
    const Vector x0{1.0}, y0{0.0};
    const ConvergenceReport rep = strong_rate_sweep(example_5_1(), averaged_example_5_1(), x0, y0, eps,
                                                    IntegratorConfig{}, {.horizon = 1.0, .n_paths = 1000, .seed = kSeed});
    if (!rep.fit) return {false, "no rate fit"};
    std::string rows;
    for (const auto& r : rep.rows) rows += fmt::format(" {:.3g}:{:.3e}", r.epsilon, r.error);
    const double s = rep.fit->slope;
    return {s >= 0.7 && s <= 1.3,
            fmt::format("slope {:.3f} (CI [{:.3f}, {:.3f}]), target [0.7, 1.3];{}", s, rep.fit->ci_low,
                        rep.fit->ci_high, rows)};
}

// 2. Averaging with time oscillation on Example 5.2 ----------------------------------
Verdict oscillating_averaging() {
    const Vector x0{1.0}, y0{0.0};
    const StrongErrorConfig run{.horizon = 1.0, .n_paths = 1000, .seed = kSeed};
    const auto coarse = sup_mean_square_gap(example_5_2(), averaged_example_5_2(), x0, y0, 0.04, {}, run);
    const auto fine = sup_mean_square_gap(example_5_2(), averaged_example_5_2(), x0, y0, 0.01, {}, run);
    const double se = combined(coarse.se, fine.se);
    const bool ok = coarse.error > 0.0 && fine.error > 0.0 && fine.error <= coarse.error + 2.0 * se &&
                    fine.error < coarse.error;
    return {ok, fmt::format("sup_t E|X-Xbar|^2: eps=0.04 {:.4e} (se {:.1e}), eps=0.01 {:.4e} (se {:.1e})",
                            coarse.error, coarse.se, fine.error, fine.se)};
}

// 3. GG^T on the linear oracle ------------------------------------------------------
Verdict g_oracle() {
    const ModelSpec m = linear_ou();  // B = -y, g = sqrt2, f = y
    FrozenSpec fs;
    fs.x = {0.0};
    fs.n_samples = 10000;
    const EmpiricalMeasure mu = sample_invariant(m, fs, NoisePath{kSeed, 0});
    const Vector fb{0.0};
    GConfig g;
    g.T_cut = 15.0;
    g.n_draws = 10000;
    g.seed = kSeed;
    const GEstimate a = estimate_G(m, fs.x, fb, mu, g);
    FrozenSpec fs2 = fs;
    fs2.n_samples = 2000;
    GConfig gp = g;
    gp.n_draws = 2000;
    const GEstimate p = estimate_G_poisson(m, fs.x, fb, sample_invariant(m, fs2, NoisePath{kSeed, 1}), gp);
    // Oracle: E[Y_t Y_0] = e^{-t} under N(0, 1), so the integral is 1.
    const double va = a.gg_t(0, 0), vp = p.gg_t(0, 0);
    const bool within = std::abs(va - 1.0) <= 0.05;
    const double cse = combined(a.se(0, 0), p.se(0, 0));
    const bool agree = std::abs(va - std::abs(vp)) <= 3.0 * cse;
    return {within && agree, fmt::format("autocovariance {:.4f} (se {:.4f}), target 1 +- 5%; poisson-rep {:.4f} "
                                         "(se {:.4f}, opposite convention {:.4f}), |diff| {:.4f} vs 3 se {:.4f}",
                                         va, a.se(0, 0), vp, p.se(0, 0), -vp, std::abs(va - std::abs(vp)), 3 * cse)};
}

// 4. Normal deviation on the linear model -------------------------------------------
Verdict normal_deviation() {
    const LinearOuParams lp{.slow_rate = 1.0, .sigma = 1.0};
    const ModelSpec m = linear_ou(lp);
    const AveragedModel avg = averaged_linear_ou(lp);
    FrozenSpec fs;
    fs.x = {0.0};
    fs.n_samples = 10000;
    GConfig g;
    g.T_cut = 15.0;
    g.n_draws = 10000;
    g.seed = kSeed;
    const Vector fb{0.0};
    const GEstimate ge = estimate_G(m, fs.x, fb, sample_invariant(m, fs, NoisePath{kSeed, 0}), g);

    DeviationRun run;
    for (int k = 1; k <= 20; ++k) run.times.push_back(0.05 * k);
    run.n_paths = 5000;
    run.seed = kSeed;
    const Vector x0{0.5}, y0{0.0};
    IntegratorConfig lcfg;
    lcfg.dt = 1e-3;
    const auto grad = gradient_field(avg);
    const auto phis = default_test_functions(1, kSeed);

    const SampleSet z_bar = sample_limit(avg, constant_field(limit_diffusion(ge)), grad, x0, lcfg, run);
    const SampleSet z_lit =
        sample_limit(avg, constant_field(limit_diffusion(ge, LimitConvention::OneSided)), grad, x0, lcfg, run);
    const SampleSet z04 = sample_deviation(m, avg, x0, y0, 0.04, {}, run);
    const SampleSet z01 = sample_deviation(m, avg, x0, y0, 0.01, {}, run);
    const DeviationReport r04 = weak_gap(z04, z_bar, phis, 0.04);
    const DeviationReport r01 = weak_gap(z01, z_bar, phis, 0.01);
    const DeviationReport lit = weak_gap(z01, z_lit, phis, 0.01);

    const bool small = r01.overall_gap <= std::max(0.02, 4.0 * r01.overall_se);
    const bool down = r01.overall_gap <= r04.overall_gap + 2.0 * combined(r01.overall_se, r04.overall_se);
    return {small && down,
            fmt::format("GG^T {:.4f}; gap eps=0.04 {:.4f} (se {:.4f}), eps=0.01 {:.4f} (se {:.4f}), bound "
                        "{:.4f}; with the literal GG^T diffusion the eps=0.01 gap is {:.4f} (se {:.4f})",
                        ge.gg_t(0, 0), r04.overall_gap, r04.overall_se, r01.overall_gap, r01.overall_se,
                        std::max(0.02, 4.0 * r01.overall_se), lit.overall_gap, lit.overall_se)};
}

// 5. Frozen contraction on Example 5.1 ----------------------------------------------
Verdict contraction() {
    const ModelSpec m = example_5_1();
    const Vector x{1.0}, y1{-1.0}, y2{1.0};
    const std::vector<double> times{1.0, 2.0, 4.0};
    const auto rows = contraction_probe(m, x, y1, y2, times, 1000, 1e-3, kSeed);
    bool ok = true;
    std::string d = fmt::format("eta {}:", m.meta.require("eta"));
    for (const auto& r : rows) {
        ok = ok && r.pass;
        d += fmt::format(" t={} E|dY|^2 {:.3e} (se {:.1e}) <= {:.3e}", r.t, r.mean_sq, r.se, r.envelope);
    }
    return {ok, d};
}

// 6. Invariant-measure oracles -------------------------------------------------------
Verdict invariant_measures() {
    // OU: B = -2y, g = sqrt2, variance g^2 / (2 * 2) = 1/2.
    const ModelSpec ou = linear_ou({.slow_rate = 0.0, .sigma = 0.0, .fast_rate = 2.0});
    FrozenSpec fs;
    fs.x = {0.0};
    fs.n_samples = 100000;
    const EmpiricalMeasure mu = sample_invariant(ou, fs, NoisePath{kSeed, 5});
    Vector sq(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) sq[i] = mu.points[i] * mu.points[i];
    const auto var = stats::batch_means(sq);
    const bool ou_ok = std::abs(var.mean - 0.5) <= 3.0 * var.se;

    // Double well: dX = (-X - X^3) dt + dW, density exp(-x^2 - x^4/2).
    StationaryConfig sc;
    sc.n_samples = 40000;
    sc.stride = 1.0;
    const EmpiricalMeasure dw = stationary_law(averaged_example_5_2(), sc, NoisePath{kSeed, 6});
    bool dw_ok = true;
    std::string d = fmt::format("OU variance {:.4f} (se {:.4f}) vs 0.5;", var.mean, var.se);
    for (int order : {2, 4}) {
        Vector v(dw.size());
        for (std::size_t i = 0; i < dw.size(); ++i) v[i] = std::pow(dw.points[i], order);
        const auto s = stats::batch_means(v);
        const double oracle = simpson_moment([](double x) { return x * x + std::pow(x, 4) / 2.0; }, order);
        dw_ok = dw_ok && std::abs(s.mean - oracle) <= 3.0 * s.se;
        d += fmt::format(" double-well m{} {:.4f} (se {:.4f}) vs {:.4f};", order, s.mean, s.se, oracle);
    }
    return {ou_ok && dw_ok, d};
}

// 7. d_BL estimator -----------------------------------------------------------------
Verdict dbl_checks() {
    auto dirac = [](double a) { return EmpiricalMeasure::dirac(std::vector<double>{a}); };
    const double same = dbl_distance(dirac(0.3), dirac(0.3)).value;
    const double one = dbl_distance(dirac(0.0), dirac(1.0)).value;
    const double two = dbl_distance(dirac(0.0), dirac(2.0)).value;
    bool ok = same == 0.0 && std::abs(one - 2.0 / 3.0) <= 1e-9 && std::abs(two - 1.0) <= 1e-9;

    std::mt19937_64 rng(kSeed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_int_distribution<int> sz(1, 12);
    auto random_measure = [&](std::size_t dim) {
        const int n = sz(rng);
        Vector pts;
        for (int i = 0; i < n * static_cast<int>(dim); ++i) pts.push_back(nd(rng) * 1.5);
        return EmpiricalMeasure::uniform(dim, pts);
    };
    double worst_tri = -1e300, worst_sym = 0.0, worst_w1 = -1e300;
    for (int k = 0; k < 100; ++k) {
        const std::size_t dim = k % 2 == 0 ? 1 : 2;
        const auto a = random_measure(dim), b = random_measure(dim), c = random_measure(dim);
        const double ab = dbl_distance(a, b).value, ba = dbl_distance(b, a).value;
        const double bc = dbl_distance(b, c).value, ac = dbl_distance(a, c).value;
        worst_sym = std::max(worst_sym, std::abs(ab - ba));
        worst_tri = std::max(worst_tri, ac - ab - bc);
        ok = ok && dbl_distance(a, a).value == 0.0 && ab <= 2.0;
        if (dim == 1) worst_w1 = std::max(worst_w1, ab - wasserstein1_1d(a, b));
    }
    ok = ok && worst_sym <= 1e-12 && worst_tri <= 1e-9 && worst_w1 <= 1e-6;
    return {ok, fmt::format("d(mu,mu) {}, d(d0,d1) {:.12f}, d(d0,d2) {:.12f}; 100 triples: max asymmetry {:.1e}, "
                            "max triangle excess {:.1e}, max d_BL - W1 {:.1e}",
                            same, one, two, worst_sym, worst_tri, worst_w1)};
}

// 8. Quasi-periodic trend on Example 5.2 --------------------------------------------
Verdict quasi_periodic() {
    QuasiPeriodicConfig q;
    q.seed = kSeed;
    q.n_paths = 2000;
    q.n_times = 32;
    q.stationary.n_samples = 4000;
    q.bootstrap = 20;
    const std::vector<double> eps{0.04, 0.01};
    const auto res = quasi_periodic_sweep(example_5_2(), averaged_example_5_2(), eps, q);
    const auto& a = res.rows[0];
    const auto& b = res.rows[1];
    const bool ok = b.gap <= a.gap + 2.0 * combined(a.se, b.se);
    return {ok, fmt::format("max_t d_BL: eps=0.04 {:.4f} (se {:.4f}, window {:.3f}), eps=0.01 {:.4f} (se {:.4f}, "
                            "window {:.3f}); sampling floor {:.4f}",
                            a.gap, a.se, a.window, b.gap, b.se, b.window, a.noise_floor)};
}

// 9. Scheme self-tests --------------------------------------------------------------
Verdict scheme_tests() {
    IntegratorConfig tamed;
    tamed.scheme = Scheme::TamedEuler;
    const std::vector<double> dts{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
    const auto bounded = strong_order_probe(bounded_drift_case(), dts, 2000, tamed, kSeed);
    const auto det = strong_order_probe(deterministic_case(), dts, 100, tamed, kSeed);
    const double s1 = bounded.fit ? bounded.fit->slope : NAN;
    const double s2 = det.fit ? det.fit->slope : NAN;
    bool ok = s1 >= 0.4 && s1 <= 0.6 && std::abs(s2 - 1.0) <= 0.1;

    // Coarse increments are exact sums of the fine ones.
    const NoiseStream w = NoisePath{kSeed, 3}.channel(Channel::SlowW1);
    bool exact = true;
    for (std::uint64_t k = 0; k < 64; ++k) {
        double sum = 0.0;
        for (std::uint64_t j = 0; j < 8; ++j) sum += std::sqrt(1e-3) * w.normal(k * 8 + j, 0);
        exact = exact && sum == w.coarse_increment(k, 0, 1e-3, 8);
    }
    // With f = 0, sigma = 1 the multiscale slow path and the averaged path
    // share every W1 increment, so their difference is exactly zero.
    const LoadedConfig cfg = load_config_text(R"J({
        "model": {"id": "pure-noise", "d1": 1, "d2": 1, "f": ["0"], "sigma": [["1"]],
                  "B": ["-y1"], "g": [["1"]], "meta": {"eta": 2}},
        "averaged": {"f_bar": ["0"], "sigma_bar": [["1"]]}})J");
    const Vector x0{0.25}, y0{0.0};
    const auto coupled = strong_error(cfg.model, *cfg.averaged, x0, y0, 0.01, {},
                                      {.horizon = 1.0, .n_paths = 50, .seed = kSeed});
    exact = exact && coupled.error == 0.0;
    ok = ok && exact;
    return {ok, fmt::format("tamed-Euler strong slope {:.3f} (target [0.4, 0.6]); deterministic slope {:.3f} "
                            "(target 1 +- 0.1); refinement and W1 sharing exact: {}",
                            s1, s2, exact ? "yes" : "no")};
}

// 10. CLI reproducibility -----------------------------------------------------------
Verdict reproducibility() {
    const fs::path root = fs::temp_directory_path() / fmt::format("msde-accept-{}", kSeed);
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate", "simulate --model example-5-1 --eps 0.01 --horizon 1 --seed 7"},
        {"strong", "strong-rate --model linear-ou --eps-list 0.25,0.125,0.0625 --paths 100 --seed 3"},
        {"gfun", "gfun --model linear-ou --x-grid -1,0,1 --draws 500 --seed 4"},
        {"deviation", "deviation --model linear-ou --eps 0.04 --paths 500 --g-draws 200 --seed 5"},
        {"longtime", "longtime --model example-5-2 --eps-list 0.04 --paths 100 --stationary 300 --times 4 "
                     "--bootstrap 4 --seed 6"},
        {"check", "check --model example-5-2 --points 2000 --seed 8"},
    };
    std::map<std::string, std::string> first;
    std::size_t files = 0;
    bool ok = true;
    std::string failures;
    for (int rep = 0; rep < 2; ++rep) {
        for (const auto& [name, args] : commands) {
            const fs::path out = root / fmt::format("{}-{}", name, rep);
            const std::string cmd =
                fmt::format("\"{}\" {} --threads 1 --out \"{}\" > /dev/null 2>&1", MSDE_CLI_PATH, args, out.string());
            const int rc = std::system(cmd.c_str());
            if (rc != 0 && name != "check") {
                ok = false;
                failures += fmt::format(" {} exited {}", name, rc);
            }
            for (const auto& e : fs::directory_iterator(out)) {
                if (e.path().extension() != ".csv") continue;
                const std::string key = name + "/" + e.path().filename().string();
                const std::string h = io::hex_digest(io::read_file(e.path()));
                if (rep == 0) {
                    first[key] = h;
                } else {
                    ++files;
                    if (first[key] != h) {
                        ok = false;
                        failures += " " + key + " differs";
                    }
                }
            }
        }
    }
    ok = ok && files == first.size() && files > 0;
    fs::remove_all(root);
    return {ok, fmt::format("{} CSV files from {} commands hashed twice{}", files, commands.size(),
                            failures.empty() ? "; all identical" : ";" + failures)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
        {1, strong_rate},   {2, oscillating_averaging}, {3, g_oracle},       {4, normal_deviation},
        {5, contraction},   {6, invariant_measures},    {7, dbl_checks},     {8, quasi_periodic},
        {9, scheme_tests},  {10, reproducibility},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    bool all = true;
    for (const auto& [id, run] : criteria) {
        if (!only.empty() && !only.contains(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v = {false, fmt::format("exception: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        all = all && v.pass;
        std::cout << fmt::format("criterion {:2}: {} [{:.1f}s] {}", id, v.pass ? "PASS" : "FAIL", secs, v.detail)
                  << std::endl;
    }
    return all ? 0 : 1;
}
