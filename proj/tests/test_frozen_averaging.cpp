#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "msde/averaging.hpp"
#include "msde/frozen.hpp"
#include "msde/stats.hpp"

using namespace msde;

TEST_SUITE("frozen") {
    TEST_CASE("empirical measure validation") {
        CHECK_NOTHROW(EmpiricalMeasure::uniform(2, {0.0, 1.0, 2.0, 3.0}).validate());
        CHECK_THROWS_AS(EmpiricalMeasure::uniform(2, {0.0, 1.0, 2.0}), ContractViolation);
        EmpiricalMeasure bad{1, {0.0, 1.0}, {0.7, 0.7}};
        CHECK_THROWS_AS(bad.validate(), ContractViolation);
        const auto d = EmpiricalMeasure::dirac(std::vector<double>{1.0, 2.0});
        CHECK(d.size() == 1);
        CHECK(d.dim == 2);
        std::ostringstream os;
        d.write_csv(os);
        CHECK(os.str() == "z_1,z_2,weight\n1,2,1\n");
    }

    TEST_CASE("burn-in and stride defaults scale with eta") {
        const ModelSpec m = linear_ou({.fast_rate = 2.0});  // eta = 4
        FrozenSpec s;
        CHECK(s.resolved_burn_in(m) == doctest::Approx(5.0 / 4.0));
        CHECK(s.resolved_stride(m) == doctest::Approx(2.0 / 4.0));
        s.burn_in = 0.1;
        CHECK_THROWS_AS((void)s.resolved_burn_in(m), ContractViolation);
    }

    TEST_CASE("frozen OU law has unit variance") {
        FrozenSpec s;
        s.x = {0.0};
        s.n_samples = 8000;
        const auto mu = sample_invariant(linear_ou(), s, NoisePath{11, 0});
        CHECK(mu.size() == 8000);
        CHECK(moment(mu, 2) == doctest::Approx(1.0).epsilon(0.06));
        CHECK_THROWS_AS((void)moment(mu, 3), ContractViolation);
        const auto again = sample_invariant(linear_ou(), s, NoisePath{11, 0});
        CHECK(again.points == mu.points);
    }

    TEST_CASE("time averaging resolves the forcing") {
        const ModelSpec m = example_5_2();
        const auto mu = EmpiricalMeasure::dirac(std::vector<double>{1.0});
        const std::vector<double> x{0.5};
        TimeAverageInfo info;
        const double v = averaged_drift_bar(m, x, 200.0, mu, &info)[0];
        // (1/T) int (cos s + sin(sqrt2 s)) ds vanishes as T grows.
        CHECK(v == doctest::Approx(-0.5 - 0.125).epsilon(0.02));
        CHECK(info.nodes >= 20 * 200 / (2 * M_PI));
    }

    TEST_CASE("poisson solution of the OU model is u(y) = y") {
        const std::vector<double> x{0.0}, y{1.5}, fb{0.0};
        PoissonConfig c;
        c.n_paths = 2000;
        c.seed = 4;
        const auto u = poisson_solution_estimate(linear_ou(), x, y, fb, c);
        CHECK(std::abs(u.value[0] - 1.5) < 4.0 * u.se[0] + 1e-3);
        CHECK(u.tail_factor < 1e-3);
        c.T_cut = 1.0;
        CHECK_THROWS_AS(poisson_solution_estimate(linear_ou(), x, y, fb, c), ContractViolation);
    }

    TEST_CASE("contraction and parameter continuity probes") {
        const std::vector<double> x{0.0}, y1{-1.0}, y2{1.0}, times{0.5, 1.0};
        const auto rows = contraction_probe(linear_ou(), x, y1, y2, times, 50, 1e-3, 1);
        REQUIRE(rows.size() == 2);
        // Linear fast drift: the coupled difference is deterministic, 4 e^{-2t}.
        CHECK(rows[1].mean_sq == doctest::Approx(4.0 * std::exp(-2.0)).epsilon(0.01));
        // The decay rate equals eta exactly here, so the envelope is attained up to discretization.
        CHECK(rows[1].mean_sq <= 1.01 * rows[1].envelope);
        const std::vector<double> deltas{0.1, 0.05};
        const auto cont = parameter_continuity_probe(example_5_1(), std::vector<double>{1.0}, deltas, 1.0, 200,
                                                     1e-3, 2);
        CHECK(cont.size() == 2);
        for (const auto& r : cont) CHECK(r.ratio < 10.0);
    }
}

TEST_SUITE("averaging") {
    TEST_CASE("closed-form averaged models") {
        const auto a = averaged_example_5_2({.a1 = 2.0});
        CHECK(eval_f_bar(a, std::vector<double>{1.0})[0] == doctest::Approx(-3.0));
        CHECK(a.lambda1 == 2.0);
        const auto o = averaged_linear_ou({.slow_rate = 1.0, .sigma = 0.5});
        CHECK(eval_sigma_bar(o, std::vector<double>{3.0})(0, 0) == 0.5);
        CHECK(gibbs_m2(0.0) > gibbs_m2(1.0));
        CHECK(gibbs_m2_prime(0.5) < 0.0);
        CHECK_THROWS_AS((void)gibbs_m2(1.5), ContractViolation);
        CHECK_THROWS_AS((void)builtin_averaged("vanderpol"), ConfigError);
    }

    TEST_CASE("table of the example 5.2 drift") {
        TableSpec t;
        t.lo = -2.0;
        t.hi = 2.0;
        t.nodes = 9;
        t.frozen.n_samples = 1000;
        const AveragedTable tab(example_5_2(), t);
        const auto m = tab.model();
        for (double x : {-1.5, 0.25, 1.75})
            CHECK(eval_f_bar(m, std::vector<double>{x})[0] == doctest::Approx(-x - x * x * x).epsilon(0.05));
        CHECK(m.lambda1 == 1.0);
        CHECK_THROWS_AS((void)eval_f_bar(m, std::vector<double>{2.5}), ContractViolation);
    }

    TEST_CASE("averaged paths and coupled runs share W1") {
        const auto avg = averaged_example_5_2();
        const std::vector<double> x0{1.0};
        const auto p = simulate_averaged(avg, x0, 1.0, {}, NoisePath{2, 0});
        const auto q = simulate_averaged(avg, x0, 1.0, {}, NoisePath{2, 0});
        CHECK(p.x == q.x);
        CHECK(coupled_dt(example_5_1(0.001), {}) == doctest::Approx(1e-4));
    }

    TEST_CASE("strong error decreases with epsilon") {
        const std::vector<double> x0{1.0}, y0{0.0};
        const StrongErrorConfig run{.horizon = 0.5, .n_paths = 200, .seed = 9};
        const auto big = strong_error(example_5_1(), averaged_example_5_1(), x0, y0, 0.1, {}, run);
        const auto small = strong_error(example_5_1(), averaged_example_5_1(), x0, y0, 0.01, {}, run);
        CHECK(small.error < big.error);
        CHECK(small.n_exploded == 0);
        const auto r1 = strong_error(example_5_1(), averaged_example_5_1(), x0, y0, 0.01, {}, run);
        const auto r4 = strong_error(example_5_1(), averaged_example_5_1(), x0, y0, 0.01, {},
                                     {.horizon = 0.5, .n_paths = 200, .seed = 9, .threads = 4});
        CHECK(r1.error == r4.error);
        CHECK(r1.error == small.error);
    }

    TEST_CASE("time regularity ratio stays bounded") {
        const std::vector<double> x0{1.0}, y0{0.0};
        const auto rows = time_regularity_probe(example_5_1(0.01), x0, y0, 4, {},
                                                {.horizon = 1.0, .n_paths = 50, .seed = 1});
        CHECK(rows.size() == 4);
        for (const auto& r : rows) CHECK(r.ratio < 5.0);
    }
}
