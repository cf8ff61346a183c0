#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "msde/integrators.hpp"
#include "msde/stats.hpp"

using namespace msde;

TEST_SUITE("integrators") {
    TEST_CASE("tamed step bounds the drift contribution") {
        const std::vector<double> drift{1e6}, diff{0.0}, state{0.0}, dw{0.0};
        std::vector<double> out(1);
        step_tamed_into(drift, diff, state, 0.01, dw, 1.0, out);
        CHECK(out[0] == doctest::Approx(0.01 * 1e6 / (1.0 + 0.01 * 1e6)));
        CHECK(std::abs(out[0]) <= 1.0);
        step_euler_into(drift, diff, state, 0.01, dw, out);
        CHECK(out[0] == doctest::Approx(1e4));
    }

    TEST_CASE("non-finite drift raises NumericOverflow with the step") {
        const std::vector<double> drift{NAN}, diff{0.0}, state{1.0}, dw{0.0};
        std::vector<double> out(1);
        try {
            step_tamed_into(drift, diff, state, 0.01, dw, 1.0, out, 17);
            FAIL("expected NumericOverflow");
        } catch (const NumericOverflow& e) {
            CHECK(e.step() == 17);
            CHECK(e.last_finite_state() == std::vector<double>{1.0});
        }
    }

    TEST_CASE("grid covers the horizon with steps no larger than dt") {
        const auto g = make_grid(1.0, 0.3);
        CHECK(g.steps == 4);
        CHECK(g.dt == doctest::Approx(0.25));
        CHECK_THROWS_AS(make_grid(-1.0, 0.1), ContractViolation);
    }

    TEST_CASE("config validation and scheme names") {
        IntegratorConfig c;
        c.taming_exponent = 2.0;
        CHECK_THROWS_AS(c.validate(), ContractViolation);
        for (auto s : {Scheme::EulerMaruyama, Scheme::TamedEuler, Scheme::SemiImplicitFast})
            CHECK(parse_scheme(to_string(s)) == s);
        CHECK_THROWS_AS(parse_scheme("rk4"), ConfigError);
    }

    TEST_CASE("multiscale paths are reproducible and thread independent") {
        const ModelSpec m = example_5_1(0.01);
        const State s0{0.0, {1.0}, {0.0}};
        const auto a = integrate_multiscale(m, s0, 0.5, {}, NoisePath{3, 0});
        const auto b = integrate_multiscale(m, s0, 0.5, {}, NoisePath{3, 0});
        const auto c = integrate_multiscale(m, s0, 0.5, {}, NoisePath{3, 1});
        CHECK(a.x == b.x);
        CHECK(a.y == b.y);
        CHECK(a.x != c.x);
        CHECK(a.t.front() == 0.0);
        CHECK(a.t.back() == doctest::Approx(0.5));
        std::ostringstream os;
        a.write_csv(os);
        CHECK(os.str().rfind("# model=example-5-1,epsilon=0.01,seed=3\nt,x_1,y_1\n", 0) == 0);
    }

    TEST_CASE("under-resolved fast scale is refused") {
        const ModelSpec m = example_5_1(0.001);
        IntegratorConfig c;
        c.dt = 0.01;
        c.fast_substeps = 1;
        CHECK_THROWS_AS(check_fast_resolution(m, c, c.dt), ContractViolation);
    }

    TEST_CASE("fast stepper with OU drift has the right stationary variance") {
        const ModelSpec m = linear_ou();
        FastStepper st(m, Scheme::SemiImplicitFast, 0.01, 1.0, 1.0, 0.0, 1.0);
        const std::vector<double> x{0.0};
        st.freeze(x);
        CHECK(st.linear_rate()[0] == doctest::Approx(1.0));
        std::vector<double> y{0.0}, samples;
        const auto w = NoisePath{1, 0}.channel(Channel::FastW2);
        for (std::uint64_t k = 0; k < 400000; ++k) {
            st.step(y, w, k);
            if (k > 1000 && k % 100 == 0) samples.push_back(y[0] * y[0]);
        }
        const auto s = stats::mean_se(samples);
        CHECK(s.mean == doctest::Approx(1.0).epsilon(0.05));
    }

    TEST_CASE("strong order probe on the deterministic case") {
        const std::vector<double> dts{0.1, 0.05, 0.025, 0.0125};
        IntegratorConfig c;
        c.scheme = Scheme::EulerMaruyama;
        const auto r = strong_order_probe(deterministic_case(), dts, 4, c, 1);
        REQUIRE(r.fit.has_value());
        CHECK(r.fit->slope == doctest::Approx(1.0).epsilon(0.1));
        const std::vector<double> bad{0.05, 0.1, 0.025};
        CHECK_THROWS_AS(strong_order_probe(deterministic_case(), bad, 4, c, 1), ContractViolation);
    }
}
