// msde: command-line front end for the multiscale SDE toolkit.
//
// Exit codes: 0 success, 1 numeric failure, 2 usage or configuration error.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "msde/averaging.hpp"
#include "msde/config.hpp"
#include "msde/deviation.hpp"
#include "msde/frozen.hpp"
#include "msde/io.hpp"
#include "msde/longtime.hpp"
#include "msde/oracles.hpp"
#include "msde/parallel.hpp"
#include "msde/probe.hpp"
#include "msde/stats.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace msde;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Common {
    std::string config;
    std::string model;
    std::string out = "msde-out";
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

void add_common(CLI::App* sub, Common& c, bool needs_model = true) {
    if (needs_model) {
        sub->add_option("--config", c.config, "JSON model configuration");
        sub->add_option("--model", c.model, "registered model id");
    }
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    sub->add_option("--threads", c.threads, "worker threads (0: MSDE_THREADS or hardware)");
}

/// Collects outputs and writes the manifest last.
class Run {
public:
    Run(std::string command, const Common& c, std::string argv_line)
        : command_(std::move(command)), common_(c), argv_(std::move(argv_line)),
          start_(std::chrono::steady_clock::now()) {
        fs::create_directories(c.out);
    }

    void emit(const std::string& name, const std::string& contents) {
        io::write_file(fs::path(common_.out) / name, contents);
        outputs_.push_back(name);
    }

    template <class Writer>
    void emit_with(const std::string& name, Writer&& w) {
        std::ostringstream os;
        w(os);
        emit(name, os.str());
    }

    void set_config_hash(std::string h) { hash_ = std::move(h); }

    void finish() {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        Json m;
        m["command"] = command_;
        m["argv"] = argv_;
        m["config_hash"] = hash_;
        m["seed"] = common_.seed;
        m["versions"] = {{"msde", kVersion}};
        m["wall_time_seconds"] = wall;
        m["outputs"] = outputs_;
        io::write_file(fs::path(common_.out) / "manifest.json", m.dump(2) + "\n");
    }

private:
    std::string command_;
    Common common_;
    std::string argv_;
    std::string hash_;
    std::vector<std::string> outputs_;
    std::chrono::steady_clock::time_point start_;
};

LoadedConfig resolve(const Common& c) {
    if (!c.config.empty() && !c.model.empty()) throw ConfigError("give either --config or --model, not both");
    if (!c.config.empty()) return load_config_file(c.config);
    if (c.model.empty()) throw ConfigError("a model is required (--config PATH or --model ID)");
    return builtin_config(c.model);
}

AveragedModel resolve_averaged(const LoadedConfig& cfg, std::uint64_t seed) {
    if (cfg.averaged) return *cfg.averaged;
    if (cfg.model.d1 != 1) {
        throw ConfigError(fmt::format("model '{}' has no closed-form averaged model; tables need d1 = 1",
                                      cfg.model.id));
    }
    TableSpec spec;
    spec.seed = seed;
    static std::vector<std::shared_ptr<AveragedTable>> keep;
    keep.push_back(std::make_shared<AveragedTable>(cfg.model, spec));
    return keep.back()->model();
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("{}: '{}' is not a number", what, item));
        }
    }
    if (out.empty()) throw ConfigError(fmt::format("{}: empty list", what));
    return out;
}

Vector broadcast(double v, std::size_t n) { return Vector(n, v); }

// simulate ----------------------------------------------------------------------

struct SimulateOpts {
    Common c;
    std::optional<double> eps;
    double horizon = 1.0;
    double dt = 1e-3;
    std::string scheme = "semi-implicit-fast";
    double x0 = 0.0;
    double y0 = 0.0;
};

void cmd_simulate(const SimulateOpts& o, const std::string& argv) {
    LoadedConfig cfg = resolve(o.c);
    ModelSpec model = o.eps ? cfg.model.with_epsilon(*o.eps) : cfg.model;
    IntegratorConfig icfg;
    icfg.scheme = parse_scheme(o.scheme);
    icfg.dt = coupled_dt(model, IntegratorConfig{.dt = o.dt});
    Run run("simulate", o.c, argv);
    run.set_config_hash(cfg.hash);
    const State s0{0.0, broadcast(o.x0, model.d1), broadcast(o.y0, model.d2)};
    const PathBundle path = integrate_multiscale(model, s0, o.horizon, icfg, NoisePath{o.c.seed, 0});
    run.emit_with("path.csv", [&](std::ostream& os) { path.write_csv(os); });
    run.finish();
}

// strong-rate -------------------------------------------------------------------

struct StrongOpts {
    Common c;
    std::string eps_list = "0.0625,0.03125,0.015625,0.0078125,0.00390625,0.001953125";
    std::size_t paths = 1000;
    double horizon = 1.0;
    double x0 = 1.0;
    double y0 = 0.0;
};

void cmd_strong_rate(const StrongOpts& o, const std::string& argv) {
    const LoadedConfig cfg = resolve(o.c);
    const AveragedModel avg = resolve_averaged(cfg, o.c.seed);
    const auto eps = parse_list(o.eps_list, "--eps-list");
    StrongErrorConfig run_cfg{.horizon = o.horizon, .n_paths = o.paths, .seed = o.c.seed, .threads = o.c.threads};
    IntegratorConfig icfg;
    Run run("strong-rate", o.c, argv);
    run.set_config_hash(cfg.hash);
    const ConvergenceReport rep = strong_rate_sweep(cfg.model, avg, broadcast(o.x0, cfg.model.d1),
                                                    broadcast(o.y0, cfg.model.d2), eps, icfg, run_cfg);
    run.emit_with("strong_rate.csv", [&](std::ostream& os) { rep.write_csv(os); });
    run.emit("strong_rate.json", rep.sidecar_json(cfg.hash));
    run.finish();
    if (rep.fit) std::cout << fmt::format("slope {:.4f} [{:.4f}, {:.4f}]\n", rep.fit->slope, rep.fit->ci_low, rep.fit->ci_high);
}

// gfun --------------------------------------------------------------------------

struct GOpts {
    Common c;
    std::string x_grid = "0";
    std::string method = "autocovariance";
    std::size_t draws = 10000;
    std::optional<double> t_cut;
};

GEstimate estimate_at(const ModelSpec& model, const AveragedModel& avg, std::span<const double> x, GMethod method,
                      std::size_t draws, std::optional<double> t_cut, std::uint64_t seed, std::uint64_t stream,
                      unsigned threads) {
    FrozenSpec fs;
    fs.x.assign(x.begin(), x.end());
    fs.n_samples = draws;
    const EmpiricalMeasure mu = sample_invariant(model, fs, NoisePath{seed, stream});
    GConfig g;
    g.T_cut = t_cut;
    g.n_draws = draws;
    g.seed = mix64(seed ^ stream);
    g.threads = threads;
    const Vector fb = eval_f_bar(avg, x);
    return method == GMethod::Autocovariance ? estimate_G(model, x, fb, mu, g) : estimate_G_poisson(model, x, fb, mu, g);
}

void cmd_gfun(const GOpts& o, const std::string& argv) {
    const LoadedConfig cfg = resolve(o.c);
    const AveragedModel avg = resolve_averaged(cfg, o.c.seed);
    if (cfg.model.d1 != 1) throw ConfigError("gfun takes a scalar x grid; d1 must be 1");
    const auto xs = parse_list(o.x_grid, "--x-grid");
    GMethod method = GMethod::Autocovariance;
    if (o.method == "poisson-rep") {
        method = GMethod::PoissonRep;
    } else if (o.method != "autocovariance") {
        throw ConfigError(fmt::format("unknown G method '{}' (autocovariance, poisson-rep)", o.method));
    }
    Run run("gfun", o.c, argv);
    run.set_config_hash(cfg.hash);
    std::ostringstream os;
    os << "x,method,gg_t,se,opposite_sign,clipped\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i];
        const GEstimate e = estimate_at(cfg.model, avg, {&x, 1}, method, o.draws, o.t_cut, o.c.seed, i, o.c.threads);
        os << io::num(x) << ',' << to_string(method) << ',' << io::num(e.gg_t(0, 0)) << ',' << io::num(e.se(0, 0))
           << ',' << (e.opposite_sign ? io::num((*e.opposite_sign)(0, 0)) : std::string()) << ','
           << (e.clipped ? 1 : 0) << '\n';
    }
    run.emit("gfun.csv", os.str());
    run.finish();
}

// deviation ---------------------------------------------------------------------

struct DeviationOpts {
    Common c;
    double eps = 0.01;
    std::size_t paths = 5000;
    double horizon = 1.0;
    std::size_t n_times = 20;
    std::size_t g_draws = 2000;
    std::size_t g_nodes = 9;
    double x0 = 0.0;
};

void cmd_deviation(const DeviationOpts& o, const std::string& argv) {
    const LoadedConfig cfg = resolve(o.c);
    const AveragedModel avg = resolve_averaged(cfg, o.c.seed);
    if (cfg.model.d1 != 1) throw ConfigError("deviation tabulates G on a scalar grid; d1 must be 1");
    if (o.n_times < 1) throw ConfigError("--times must be positive");
    Run run("deviation", o.c, argv);
    run.set_config_hash(cfg.hash);

    // G on a grid around x0, limit covariance 2 sym(GG^T).
    const std::size_t nodes = std::max<std::size_t>(2, o.g_nodes);
    Vector grid(nodes);
    std::vector<Matrix> diffusion;
    std::ostringstream gcsv;
    gcsv << "x,gg_t,se,limit_diffusion\n";
    for (std::size_t i = 0; i < nodes; ++i) {
        grid[i] = o.x0 - 2.0 + 4.0 * static_cast<double>(i) / static_cast<double>(nodes - 1);
        const GEstimate e = estimate_at(cfg.model, avg, {&grid[i], 1}, GMethod::Autocovariance, o.g_draws,
                                        std::nullopt, o.c.seed, 1000 + i, o.c.threads);
        diffusion.push_back(limit_diffusion(e));
        gcsv << io::num(grid[i]) << ',' << io::num(e.gg_t(0, 0)) << ',' << io::num(e.se(0, 0)) << ','
             << io::num(diffusion.back()(0, 0)) << '\n';
    }
    const MatrixField G = tabulated_field(grid, diffusion);

    DeviationRun dr;
    dr.n_paths = o.paths;
    dr.seed = o.c.seed;
    dr.threads = o.c.threads;
    for (std::size_t k = 1; k <= o.n_times; ++k) {
        dr.times.push_back(o.horizon * static_cast<double>(k) / static_cast<double>(o.n_times));
    }
    IntegratorConfig icfg;
    const Vector x0{o.x0};
    const Vector y0(cfg.model.d2, 0.0);
    const SampleSet z_eps = sample_deviation(cfg.model, avg, x0, y0, o.eps, icfg, dr);
    IntegratorConfig lcfg;
    lcfg.dt = coupled_dt(cfg.model.with_epsilon(o.eps), icfg);
    const SampleSet z_bar = sample_limit(avg, G, gradient_field(avg), x0, lcfg, dr);
    const DeviationReport rep = weak_gap(z_eps, z_bar, default_test_functions(1, o.c.seed), o.eps);
    run.emit("g_table.csv", gcsv.str());
    run.emit_with("deviation.csv", [&](std::ostream& os) { rep.write_csv(os); });
    run.emit("deviation.json", rep.sidecar_json(o.c.seed));
    run.finish();
    std::cout << fmt::format("sup gap {:.5f} (se {:.5f})\n", rep.overall_gap, rep.overall_se);
}

// longtime ----------------------------------------------------------------------

struct LongtimeOpts {
    Common c;
    std::string eps_list = "0.04,0.01";
    std::size_t paths = 2000;
    std::size_t n_times = 32;
    std::size_t stationary = 4000;
    std::size_t bootstrap = 20;
    std::optional<double> window;
    std::string method = "lp-exact";
};

void cmd_longtime(const LongtimeOpts& o, const std::string& argv) {
    const LoadedConfig cfg = resolve(o.c);
    const AveragedModel avg = resolve_averaged(cfg, o.c.seed);
    const auto eps = parse_list(o.eps_list, "--eps-list");
    QuasiPeriodicConfig q;
    q.n_paths = o.paths;
    q.n_times = o.n_times;
    q.stationary.n_samples = o.stationary;
    q.bootstrap = o.bootstrap;
    q.window = o.window;
    q.method = parse_dbl_method(o.method);
    q.seed = o.c.seed;
    q.threads = o.c.threads;
    Run run("longtime", o.c, argv);
    run.set_config_hash(cfg.hash);
    const QuasiPeriodicResult res = quasi_periodic_sweep(cfg.model, avg, eps, q);
    run.emit_with("longtime.csv", [&](std::ostream& os) { res.report.write_csv(os); });
    run.emit_with("longtime_gap.csv", [&](std::ostream& os) { res.write_gap_csv(os); });
    std::ostringstream rows;
    rows << "epsilon,gap,se,argmax_t,noise_floor,window,n_paths,n_exploded\n";
    for (const auto& r : res.rows) {
        rows << io::num(r.epsilon) << ',' << io::num(r.gap) << ',' << io::num(r.se) << ',' << io::num(r.argmax_t)
             << ',' << io::num(r.noise_floor) << ',' << io::num(r.window) << ',' << r.n_paths << ','
             << r.n_exploded << '\n';
    }
    run.emit("longtime_rows.csv", rows.str());
    run.emit("longtime.json", res.report.sidecar_json(cfg.hash));
    run.finish();
}

// check -------------------------------------------------------------------------

struct CheckOpts {
    Common c;
    std::size_t points = 10000;
};

int cmd_check(const CheckOpts& o, const std::string& argv) {
    const LoadedConfig cfg = resolve(o.c);
    Run run("check", o.c, argv);
    run.set_config_hash(cfg.hash);
    ProbeSampler sampler;
    sampler.n_points = o.points;
    sampler.seed = o.c.seed;
    std::ostringstream os;
    os << "assumption,status,n_points,n_pass,n_fail,worst_margin,detail\n";
    bool any_fail = false;
    for (Assumption a : all_assumptions()) {
        os << to_string(a) << ',';
        try {
            const ProbeReport r = probe_assumption(cfg.model, a, sampler);
            const std::string status = r.no_evidence ? "no-evidence" : (r.passed() ? "pass" : "fail");
            any_fail = any_fail || !r.passed();
            std::string witness;
            if (r.witness) witness = fmt::format("witness {}", fmt::join(*r.witness, " "));
            os << status << ',' << r.n_points << ',' << r.n_pass << ',' << r.n_fail << ',' << io::num(r.worst_margin)
               << ',' << io::csv_field(witness) << '\n';
        } catch (const ConfigError& e) {
            os << "skipped,0,0,0,," << io::csv_field(e.what()) << '\n';
        }
    }
    run.emit("check.csv", os.str());
    run.finish();
    return any_fail ? 1 : 0;
}

// plot --------------------------------------------------------------------------

struct PlotOpts {
    Common c;
    std::string in;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> cols;
};

Table read_numeric_csv(const std::string& text) {
    Table t;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (t.header.empty()) {
            t.header = cells;
            t.cols.assign(cells.size(), {});
            continue;
        }
        for (std::size_t i = 0; i < t.header.size(); ++i) {
            double v = std::numeric_limits<double>::quiet_NaN();
            if (i < cells.size()) {
                try {
                    v = std::stod(cells[i]);
                } catch (const std::exception&) {
                }
            }
            t.cols[i].push_back(v);
        }
    }
    if (t.header.size() < 2 || t.cols[0].empty()) throw ConfigError("plot: CSV needs a header and numeric rows");
    return t;
}

std::string render_svg(const Table& t) {
    const auto find = [&](const std::string& n) {
        return static_cast<std::size_t>(std::find(t.header.begin(), t.header.end(), n) - t.header.begin());
    };
    const std::size_t err = find("error");
    const bool loglog = err < t.header.size();
    std::vector<std::size_t> ys;
    if (loglog) {
        ys = {err};
    } else {
        for (std::size_t i = 1; i < t.header.size() && ys.size() < 4; ++i) ys.push_back(i);
    }
    auto tr = [&](double v) { return loglog ? std::log10(v) : v; };
    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
    for (std::size_t r = 0; r < t.cols[0].size(); ++r) {
        const double x = tr(t.cols[0][r]);
        if (!std::isfinite(x)) continue;
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
        for (auto c : ys) {
            const double y = tr(t.cols[c][r]);
            if (!std::isfinite(y)) continue;
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    }
    if (!(x_hi >= x_lo) || !(y_hi >= y_lo)) throw ConfigError("plot: no finite data");
    if (x_hi == x_lo) x_hi = x_lo + 1.0;
    if (y_hi == y_lo) y_hi = y_lo + 1.0;
    const double W = 640, H = 400, m = 60;
    auto px = [&](double x) { return m + (x - x_lo) / (x_hi - x_lo) * (W - 2 * m); };
    auto py = [&](double y) { return H - m - (y - y_lo) / (y_hi - y_lo) * (H - 2 * m); };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        W, H);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", m, H - m, W - m);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", m, H - m, m);
    const std::string xl = loglog ? "log10 " + t.header[0] : t.header[0];
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", W / 2, H - 15, xl);
    s += fmt::format("<text x=\"{}\" y=\"{}\">{:.3g}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n",
                     m, H - m + 15, x_lo, W - m, H - m + 15, x_hi);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text><text x=\"{}\" y=\"{}\" "
                     "text-anchor=\"end\">{:.3g}</text>\n",
                     m - 5, H - m, y_lo, m - 5, m + 4, y_hi);
    for (std::size_t k = 0; k < ys.size(); ++k) {
        const std::size_t c = ys[k];
        std::string pts;
        std::vector<double> lx, ly;
        for (std::size_t r = 0; r < t.cols[0].size(); ++r) {
            const double x = tr(t.cols[0][r]), y = tr(t.cols[c][r]);
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (loglog) {
                s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", px(x), py(y), colors[k]);
                lx.push_back(x);
                ly.push_back(y);
            } else {
                pts += fmt::format("{:.2f},{:.2f} ", px(x), py(y));
            }
        }
        if (!loglog) {
            s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" points=\"{}\"/>\n", colors[k], pts);
        } else if (lx.size() >= 3) {
            const auto fit = stats::least_squares(lx, ly);
            s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" "
                             "stroke-dasharray=\"4 3\"/>\n",
                             px(x_lo), py(fit.intercept + fit.slope * x_lo), px(x_hi),
                             py(fit.intercept + fit.slope * x_hi), colors[k]);
            s += fmt::format("<text x=\"{}\" y=\"{}\">slope {:.3f}</text>\n", m + 10, m + 10, fit.slope);
        }
        s += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", W - m - 100, m + 14 * (k + 1), colors[k],
                         t.header[c]);
    }
    s += "</svg>\n";
    return s;
}

void cmd_plot(const PlotOpts& o, const std::string& argv) {
    std::string text;
    try {
        text = io::read_file(o.in);
    } catch (const std::exception& e) {
        throw ConfigError(fmt::format("plot: cannot read '{}': {}", o.in, e.what()));
    }
    const std::string svg = render_svg(read_numeric_csv(text));
    Run run("plot", o.c, argv);
    run.set_config_hash(io::hex_digest(text));
    run.emit(fs::path(o.in).stem().string() + ".svg", svg);
    run.finish();
}

// oracles -----------------------------------------------------------------------

int cmd_oracles(const Common& c, const std::string& argv) {
    Run run("oracles", c, argv);
    const OracleReport rep = run_oracle_suite(c.seed, c.threads);
    std::ostringstream text;
    rep.write_text(text);
    std::cout << text.str();
    run.emit("oracles.txt", text.str());
    run.emit_with("oracles.xml", [&](std::ostream& os) { rep.write_junit(os); });
    run.finish();
    return rep.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and verification toolkit for multiscale SDEs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string argv_line;
    for (int i = 1; i < argc; ++i) argv_line += (i > 1 ? " " : "") + std::string(argv[i]);

    SimulateOpts sim;
    auto* s_sim = app.add_subcommand("simulate", "integrate the coupled slow-fast system");
    add_common(s_sim, sim.c);
    s_sim->add_option("--eps", sim.eps, "scale parameter epsilon");
    s_sim->add_option("--horizon", sim.horizon, "time horizon")->capture_default_str();
    s_sim->add_option("--dt", sim.dt, "macro step upper bound")->capture_default_str();
    s_sim->add_option("--scheme", sim.scheme, "euler-maruyama, tamed-euler or semi-implicit-fast")
        ->capture_default_str();
    s_sim->add_option("--x0", sim.x0, "initial slow state (all coordinates)");
    s_sim->add_option("--y0", sim.y0, "initial fast state (all coordinates)");

    StrongOpts strong;
    auto* s_strong = app.add_subcommand("strong-rate", "strong averaging error sweep with rate fit");
    add_common(s_strong, strong.c);
    s_strong->add_option("--eps-list", strong.eps_list, "comma-separated decreasing eps values")
        ->capture_default_str();
    s_strong->add_option("--paths", strong.paths, "paths per eps")->capture_default_str();
    s_strong->add_option("--horizon", strong.horizon, "time horizon")->capture_default_str();
    s_strong->add_option("--x0", strong.x0, "initial slow state")->capture_default_str();

    DeviationOpts dev;
    auto* s_dev = app.add_subcommand("deviation", "weak gap between Z^eps and its limit");
    add_common(s_dev, dev.c);
    s_dev->add_option("--eps", dev.eps, "scale parameter epsilon")->capture_default_str();
    s_dev->add_option("--paths", dev.paths, "paths per side")->capture_default_str();
    s_dev->add_option("--horizon", dev.horizon, "time horizon")->capture_default_str();
    s_dev->add_option("--times", dev.n_times, "number of sample times")->capture_default_str();
    s_dev->add_option("--g-draws", dev.g_draws, "draws per G grid node")->capture_default_str();
    s_dev->add_option("--x0", dev.x0, "initial slow state")->capture_default_str();

    GOpts gopt;
    auto* s_g = app.add_subcommand("gfun", "estimate GG^T on an x grid");
    add_common(s_g, gopt.c);
    s_g->add_option("--x-grid", gopt.x_grid, "comma-separated x values")->capture_default_str();
    s_g->add_option("--method", gopt.method, "autocovariance or poisson-rep")->capture_default_str();
    s_g->add_option("--draws", gopt.draws, "draws from mu_x")->capture_default_str();
    s_g->add_option("--t-cut", gopt.t_cut, "truncation time");

    LongtimeOpts lt;
    auto* s_lt = app.add_subcommand("longtime", "d_BL sweep against the averaged stationary law");
    add_common(s_lt, lt.c);
    s_lt->add_option("--eps-list", lt.eps_list, "comma-separated decreasing eps values")->capture_default_str();
    s_lt->add_option("--paths", lt.paths, "paths per eps")->capture_default_str();
    s_lt->add_option("--times", lt.n_times, "snapshot times per window")->capture_default_str();
    s_lt->add_option("--stationary", lt.stationary, "stationary samples")->capture_default_str();
    s_lt->add_option("--bootstrap", lt.bootstrap, "bootstrap resamples at the argmax")->capture_default_str();
    s_lt->add_option("--window", lt.window, "snapshot window length");
    s_lt->add_option("--method", lt.method, "lp-exact or w1-1d")->capture_default_str();

    CheckOpts chk;
    auto* s_chk = app.add_subcommand("check", "probe the declared structural assumptions");
    add_common(s_chk, chk.c);
    s_chk->add_option("--points", chk.points, "probe points")->capture_default_str();

    PlotOpts plot;
    auto* s_plot = app.add_subcommand("plot", "render a CSV as a minimal SVG");
    add_common(s_plot, plot.c, false);
    s_plot->add_option("--in", plot.in, "input CSV")->required();

    Common orc;
    auto* s_orc = app.add_subcommand("oracles", "run the analytic oracle suite");
    add_common(s_orc, orc, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        (void)app.exit(e);
        return 2;
    }

    try {
        auto threads = [](const Common& c) {
            if (c.threads > 0) set_default_threads(c.threads);
        };
        int code = 0;
        if (*s_sim) {
            threads(sim.c);
            cmd_simulate(sim, argv_line);
        } else if (*s_strong) {
            threads(strong.c);
            cmd_strong_rate(strong, argv_line);
        } else if (*s_dev) {
            threads(dev.c);
            cmd_deviation(dev, argv_line);
        } else if (*s_g) {
            threads(gopt.c);
            cmd_gfun(gopt, argv_line);
        } else if (*s_lt) {
            threads(lt.c);
            cmd_longtime(lt, argv_line);
        } else if (*s_chk) {
            threads(chk.c);
            code = cmd_check(chk, argv_line);
        } else if (*s_plot) {
            cmd_plot(plot, argv_line);
        } else if (*s_orc) {
            threads(orc);
            code = cmd_oracles(orc, argv_line);
        }
        return code;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 1;
    }
}
