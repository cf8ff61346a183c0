#include "msde/oracles.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "msde/averaging.hpp"
#include "msde/dbl.hpp"
#include "msde/deviation.hpp"
#include "msde/dsl.hpp"
#include "msde/frozen.hpp"
#include "msde/io.hpp"
#include "msde/longtime.hpp"
#include "msde/stats.hpp"

namespace msde {

namespace {

/// Composite Simpson rule on [-R, R] of y^m exp(-V(y)) / Z.
template <class Potential>
double gibbs_moment(Potential V, int m, double R = 8.0, std::size_t n = 8000) {
    const double h = 2.0 * R / static_cast<double>(n);
    double z = 0.0, num = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double y = -R + h * static_cast<double>(i);
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        const double p = std::exp(-V(y));
        z += w * p;
        num += w * p * std::pow(y, m);
    }
    return num / z;
}

Measurement moment_with_se(const EmpiricalMeasure& mu, int m) {
    Vector v(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) v[i] = std::pow(mu.points[i], m);
    const auto s = stats::batch_means(v);
    return {s.mean, s.se};
}

EmpiricalMeasure dirac1(double at) { return EmpiricalMeasure::dirac(std::vector<double>{at}); }

}  // namespace

bool OracleReport::all_passed() const {
    return std::all_of(results.begin(), results.end(), [](const OracleResult& r) { return r.pass; });
}

void OracleReport::write_text(std::ostream& os) const {
    std::size_t passed = 0;
    for (const auto& r : results) {
        passed += r.pass ? 1 : 0;
        os << fmt::format("{} {}: measured {} (se {}), expected {}, allowed {}\n", r.pass ? "PASS" : "FAIL", r.name,
                          io::num(r.measured), io::num(r.se), io::num(r.expected), io::num(r.allowed));
        os << "    derivation: " << r.derivation << '\n';
        if (!r.error.empty()) os << "    error: " << r.error << '\n';
    }
    os << fmt::format("{} of {} oracle cases passed\n", passed, results.size());
}

namespace {

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void OracleReport::write_junit(std::ostream& os) const {
    const auto failures = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.pass; });
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << fmt::format("<testsuite name=\"oracles\" tests=\"{}\" failures=\"{}\">\n", results.size(), failures);
    for (const auto& r : results) {
        os << fmt::format("  <testcase classname=\"oracles\" name=\"{}\">", xml_escape(r.name));
        if (!r.pass) {
            const std::string msg = r.error.empty()
                                        ? fmt::format("measured {} expected {} allowed {}", io::num(r.measured),
                                                      io::num(r.expected), io::num(r.allowed))
                                        : r.error;
            os << fmt::format("<failure message=\"{}\"/>", xml_escape(msg));
        }
        os << fmt::format("<system-out>{}</system-out></testcase>\n", xml_escape(r.derivation));
    }
    os << "</testsuite>\n";
}

std::vector<OracleCase> oracle_cases() {
    std::vector<OracleCase> cases;

    cases.push_back({"linear-ou-gg", 1.0, Tolerance::Relative, 0.05,
                     "f = y, dY = -Y dt + sqrt2 dW: E[Y_t Y_0] = e^{-t} under N(0,1), integral over [0, inf) is 1",
                     [](std::uint64_t seed, unsigned threads) {
                         const ModelSpec m = linear_ou();
                         FrozenSpec fs;
                         fs.x = {0.0};
                         fs.n_samples = 10000;
                         const EmpiricalMeasure mu = sample_invariant(m, fs, NoisePath{seed, 0});
                         GConfig g;
                         g.T_cut = 15.0;
                         g.n_draws = 10000;
                         g.seed = seed;
                         g.threads = threads;
                         const double zero = 0.0;
                         const GEstimate e = estimate_G(m, fs.x, {&zero, 1}, mu, g);
                         return Measurement{e.gg_t(0, 0), e.se(0, 0)};
                     }});

    cases.push_back({"linear-ou-poisson-magnitude", 1.0, Tolerance::KSe, 4.0,
                     "u solves -u' y + u'' = -y, so u = y and int y u dN(0,1) = 1",
                     [](std::uint64_t seed, unsigned threads) {
                         const ModelSpec m = linear_ou();
                         FrozenSpec fs;
                         fs.x = {0.0};
                         fs.n_samples = 2000;
                         const EmpiricalMeasure mu = sample_invariant(m, fs, NoisePath{seed, 1});
                         GConfig g;
                         g.T_cut = 15.0;
                         g.n_draws = 2000;
                         g.seed = seed;
                         g.threads = threads;
                         const double zero = 0.0;
                         const GEstimate e = estimate_G_poisson(m, fs.x, {&zero, 1}, mu, g);
                         return Measurement{std::abs(e.gg_t(0, 0)), e.se(0, 0)};
                     }});

    cases.push_back({"example-5-2-averaged-drift", 0.0, Tolerance::Absolute, 0.02,
                     "frozen law of dY = (-Y^3 - Y) dt + dW is symmetric, so E[y] = 0 and fbar = -a1 x - x^3; "
                     "measured value is the largest deviation over x in {-1.5, 0.5, 1.2}",
                     [](std::uint64_t seed, unsigned) {
                         const ModelSpec m = example_5_2();
                         double worst = 0.0;
                         std::uint64_t k = 0;
                         for (double x : {-1.5, 0.5, 1.2}) {
                             FrozenSpec fs;
                             fs.x = {x};
                             fs.n_samples = 4000;
                             const EmpiricalMeasure mu = sample_invariant(m, fs, NoisePath{seed, 10 + k++});
                             const double est = averaged_drift_bar(m, fs.x, 200.0, mu)[0];
                             worst = std::max(worst, std::abs(est - (-x - x * x * x)));
                         }
                         return Measurement{worst, 0.0};
                     }});

    cases.push_back({"example-5-1-fbar-quadrature", 0.0, Tolerance::Absolute, 1e-7,
                     "fbar(x) - (x - x^3) = sin x E[y^2] with E[y^2] from Simpson quadrature of "
                     "exp(-y^2 - y^4/2 - sin^2(x) y^6/3); measured value is the largest deviation over x in "
                     "{0.3, 1, 2.5}",
                     [](std::uint64_t, unsigned) {
                         const AveragedModel avg = averaged_example_5_1();
                         double worst = 0.0;
                         for (double x : {0.3, 1.0, 2.5}) {
                             const double s = std::sin(x) * std::sin(x);
                             const double m2 = gibbs_moment(
                                 [s](double y) { return y * y + std::pow(y, 4) / 2.0 + s * std::pow(y, 6) / 3.0; },
                                 2);
                             const double oracle = x - x * x * x + std::sin(x) * m2;
                             worst = std::max(worst, std::abs(eval_f_bar(avg, std::vector<double>{x})[0] - oracle));
                         }
                         return Measurement{worst, 0.0};
                     }});

    cases.push_back({"ou-stationary-variance", 0.5, Tolerance::KSe, 3.0,
                     "dY = -2Y dt + sqrt2 dW has stationary variance g^2 / (2r) = 2/4",
                     [](std::uint64_t seed, unsigned) {
                         const ModelSpec m = linear_ou({.slow_rate = 0.0, .sigma = 0.0, .fast_rate = 2.0});
                         FrozenSpec fs;
                         fs.x = {0.0};
                         fs.n_samples = 20000;
                         return moment_with_se(sample_invariant(m, fs, NoisePath{seed, 2}), 2);
                     }});

    for (int order : {2, 4}) {
        const double expected =
            gibbs_moment([](double y) { return y * y + std::pow(y, 4) / 2.0; }, order);
        cases.push_back({fmt::format("double-well-moment-{}", order), expected, Tolerance::KSe, 3.0,
                         fmt::format("dX = (-X - X^3) dt + dW has density proportional to exp(-x^2 - x^4/2); "
                                     "moment {} by Simpson quadrature on [-8, 8]",
                                     order),
                         [order](std::uint64_t seed, unsigned) {
                             StationaryConfig sc;
                             sc.n_samples = 20000;
                             sc.stride = 1.0;
                             return moment_with_se(stationary_law(averaged_example_5_2(), sc, NoisePath{seed, 3}),
                                                   order);
                         }});
    }

    cases.push_back({"dbl-point-mass-unit", 2.0 / 3.0, Tolerance::Absolute, 1e-9,
                     "d(delta_0, delta_1) = max over L + c = 1 of min(L, 2c), attained at L = 2/3",
                     [](std::uint64_t, unsigned) {
                         return Measurement{dbl_distance(dirac1(0.0), dirac1(1.0)).value, 0.0};
                     }});
    cases.push_back({"dbl-point-mass-two", 1.0, Tolerance::Absolute, 1e-9,
                     "d(delta_0, delta_2) = max over L + c = 1 of min(2L, 2c), attained at L = 1/2",
                     [](std::uint64_t, unsigned) {
                         return Measurement{dbl_distance(dirac1(0.0), dirac1(2.0)).value, 0.0};
                     }});

    cases.push_back({"dsl-example-5-1-drift", 1.0 + std::sin(1.0), Tolerance::Absolute, 1e-12,
                     "x - x^3 + y^2 sin x + y at x = y = 1 is 1 + sin 1",
                     [](std::uint64_t, unsigned) {
                         const dsl::Compiled f(dsl::parse("x1 - x1^3 + y1^2*sin(x1) + y1"));
                         const double one = 1.0;
                         return Measurement{f(0.0, {&one, 1}, {&one, 1}), 0.0};
                     }});
    cases.push_back({"builtin-example-5-1-drift", 1.0 + std::sin(1.0), Tolerance::Absolute, 1e-12,
                     "x - x^3 + y^2 sin x + y at x = y = 1 is 1 + sin 1",
                     [](std::uint64_t, unsigned) {
                         const double one = 1.0;
                         return Measurement{eval_slow_drift(example_5_1(), 0.0, {&one, 1}, {&one, 1})[0], 0.0};
                     }});
    return cases;
}

OracleResult run_oracle(const OracleCase& c, std::uint64_t seed, unsigned threads) {
    OracleResult r;
    r.name = c.name;
    r.expected = c.expected;
    r.derivation = c.derivation;
    try {
        const Measurement m = c.measure(seed, threads);
        r.measured = m.value;
        r.se = m.se;
        switch (c.policy) {
            case Tolerance::Absolute: r.allowed = c.tol; break;
            case Tolerance::Relative: r.allowed = c.tol * std::abs(c.expected); break;
            case Tolerance::KSe: r.allowed = c.tol * m.se; break;
        }
        r.pass = std::isfinite(m.value) && std::abs(m.value - c.expected) <= r.allowed;
    } catch (const std::exception& e) {
        r.error = e.what();
        r.pass = false;
    }
    return r;
}

OracleReport run_oracle_suite(std::uint64_t seed, unsigned threads) {
    OracleReport report;
    for (const auto& c : oracle_cases()) report.results.push_back(run_oracle(c, seed, threads));
    return report;
}

}  // namespace msde
