#include <doctest.h>

#include <cmath>
#include <vector>

#include "msde/config.hpp"
#include "msde/deviation.hpp"

using namespace msde;

TEST_SUITE("deviation") {
    TEST_CASE("deviation path scales the difference") {
        PathBundle a, b;
        a.d1 = b.d1 = 1;
        a.t = b.t = {0.0, 0.5};
        a.x = {1.0, 1.2};
        b.x = {1.0, 1.0};
        const auto z = deviation_path(a, b, 0.04);
        CHECK(z.x[0] == 0.0);
        CHECK(z.x[1] == doctest::Approx(1.0));
        b.t = {0.0, 0.6};
        CHECK_THROWS_AS(deviation_path(a, b, 0.04), ContractViolation);
    }

    TEST_CASE("psd square root and clipping") {
        Matrix a(2, 2);
        a(0, 0) = 4.0;
        a(1, 1) = 9.0;
        const Matrix r = psd_sqrt(a, 1e-9);
        CHECK(r(0, 0) == doctest::Approx(2.0));
        CHECK(r(1, 1) == doctest::Approx(3.0));
        a(1, 1) = -1e-12;
        double clipped = 0.0;
        const Matrix c = psd_sqrt(a, 1e-9, &clipped);
        CHECK(c(1, 1) == 0.0);
        CHECK(clipped == doctest::Approx(1e-12));
        a(1, 1) = -1.0;
        CHECK_THROWS_AS(psd_sqrt(a, 1e-9), NumericError);
    }

    TEST_CASE("limit diffusion conventions differ by sqrt2") {
        GEstimate g;
        g.gg_t = Matrix(1, 1, 0.5);
        g.se = Matrix(1, 1, 0.0);
        g.g = psd_sqrt(g.gg_t, 0.0);
        CHECK(limit_diffusion(g)(0, 0) == doctest::Approx(1.0));
        CHECK(limit_diffusion(g, LimitConvention::OneSided)(0, 0) == doctest::Approx(std::sqrt(0.5)));
    }

    TEST_CASE("G of the OU model by both representations") {
        const ModelSpec m = linear_ou();
        FrozenSpec fs;
        fs.x = {0.0};
        fs.n_samples = 2000;
        const auto mu = sample_invariant(m, fs, NoisePath{21, 0});
        GConfig c;
        c.n_draws = 2000;
        c.seed = 21;
        const std::vector<double> fb{0.0};
        const auto a = estimate_G(m, fs.x, fb, mu, c);
        CHECK(std::abs(a.gg_t(0, 0) - 1.0) < 4.0 * a.se(0, 0) + 0.05);
        c.n_draws = 400;
        const auto p = estimate_G_poisson(m, fs.x, fb, mu, c);
        REQUIRE(p.opposite_sign.has_value());
        CHECK((*p.opposite_sign)(0, 0) == -p.gg_t(0, 0));
        CHECK(std::abs(std::abs(p.gg_t(0, 0)) - 1.0) < 4.0 * p.se(0, 0));
        c.T_cut = 2.0;
        CHECK_THROWS_AS(estimate_G(m, fs.x, fb, mu, c), ContractViolation);
    }

    TEST_CASE("gradient of fbar: exact against finite differences") {
        const auto avg = averaged_example_5_1();
        const std::vector<double> x{0.8};
        const auto g = grad_f_bar(avg, x, default_fd_step(x));
        REQUIRE(g.max_abs_diff.has_value());
        CHECK(*g.max_abs_diff < 1e-5);
        CHECK_THROWS_AS(grad_f_bar(avg, x, 1e-20), ContractViolation);
        const auto field = gradient_field(averaged_example_5_2());
        CHECK(field(std::vector<double>{1.0})(0, 0) == doctest::Approx(-4.0));
    }

    TEST_CASE("tabulated field interpolates and clamps") {
        const auto f = tabulated_field({0.0, 1.0}, {Matrix(1, 1, 1.0), Matrix(1, 1, 3.0)});
        CHECK(f(std::vector<double>{0.25})(0, 0) == doctest::Approx(1.5));
        CHECK(f(std::vector<double>{5.0})(0, 0) == 3.0);
        CHECK(constant_field(Matrix(1, 1, 2.0))(std::vector<double>{7.0})(0, 0) == 2.0);
    }

    TEST_CASE("default test functions are bounded") {
        const auto phis = default_test_functions(2, 3);
        CHECK(phis.size() == 5);
        for (const auto& p : phis)
            for (double s : {-100.0, 0.0, 100.0}) CHECK(std::abs(p.phi(std::vector<double>{s, -s})) <= 1.0);
    }

    TEST_CASE("weak gap on the linear model is small and needs enough paths") {
        const LinearOuParams lp{.slow_rate = 1.0, .sigma = 1.0};
        const ModelSpec m = linear_ou(lp);
        const auto avg = averaged_linear_ou(lp);
        DeviationRun run;
        run.times = {0.25, 0.5};
        run.n_paths = 600;
        run.seed = 2;
        const std::vector<double> x0{0.5}, y0{0.0};
        const auto z = sample_deviation(m, avg, x0, y0, 0.05, {}, run);
        const auto zb = sample_limit(avg, constant_field(Matrix(1, 1, std::sqrt(2.0))), gradient_field(avg), x0,
                                     {}, run);
        CHECK(z.n_paths == 600);
        const auto rep = weak_gap(z, zb, default_test_functions(1), 0.05);
        CHECK(rep.overall_gap < 0.1);
        CHECK(rep.rows.size() == 2 * 5);
        run.n_paths = 100;
        const auto few = sample_limit(avg, constant_field(Matrix(1, 1, 1.0)), gradient_field(avg), x0, {}, run);
        CHECK_THROWS_AS(weak_gap(few, few, default_test_functions(1), 0.05), ContractViolation);
    }

    TEST_CASE("state-dependent slow diffusion is refused") {
        const auto cfg = load_config_text(R"J({
            "model": {"id": "mult", "d1": 1, "d2": 1, "f": ["y1"], "sigma": [["1 + 0.1*sin(x1)"]],
                      "B": ["-y1"], "g": [["1"]], "meta": {"eta": 2}},
            "averaged": {"f_bar": ["0"], "sigma_bar": [["1 + 0.1*sin(x1)"]]}})J");
        DeviationRun run;
        run.times = {0.5};
        run.n_paths = 10;
        const std::vector<double> x0{0.0}, y0{0.0};
        CHECK_THROWS_AS(sample_deviation(cfg.model, *cfg.averaged, x0, y0, 0.05, {}, run), ContractViolation);
    }
}
