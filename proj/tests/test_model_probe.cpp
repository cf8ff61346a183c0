#include <doctest.h>

#include <cmath>
#include <string>

#include "msde/model.hpp"
#include "msde/probe.hpp"

using namespace msde;

TEST_SUITE("model") {
    TEST_CASE("scale exponents are validated") {
        ScaleExponents s;
        CHECK_NOTHROW(s.validate());
        s.beta = 1.0;  // beta = 2 alpha
        CHECK_THROWS_AS(s.validate(), ContractViolation);
        s = {};
        s.gamma = 0.0;
        CHECK_THROWS_AS(s.validate(), ContractViolation);
        s = {};
        s.epsilon = 1.5;
        CHECK_THROWS_AS(s.validate(), ContractViolation);
        s = {.alpha = 0.5, .beta = 1.0 / 3.0, .gamma = 0.5, .epsilon = 0.04};
        CHECK(s.fast_drift_scale() == doctest::Approx(25.0));
        CHECK(s.fast_noise_scale() == doctest::Approx(5.0));
        CHECK(s.time_scale() == doctest::Approx(5.0));
        CHECK(s.fast_time() == doctest::Approx(0.04));
    }

    TEST_CASE("example 5.1 coefficients") {
        const ModelSpec m = example_5_1();
        const double x = 0.7, y = -1.3;
        const double fx = eval_slow_drift(m, 3.0, {&x, 1}, {&y, 1})[0];
        CHECK(fx == doctest::Approx(x - x * x * x + y * y * std::sin(x) + y));
        const double s = std::sin(x);
        CHECK(eval_fast_drift(m, {&x, 1}, {&y, 1})[0] ==
              doctest::Approx(-s * s * std::pow(y, 5) - y * y * y - y));
        CHECK(eval_slow_diffusion(m, 0.0, {&x, 1})(0, 0) == 1.0);
        CHECK(m.meta.require("eta") == 2.0);
        CHECK(m.traits.time_independent);
    }

    TEST_CASE("example 5.2 is time dependent with an intermediate drift") {
        const ModelSpec m = example_5_2();
        CHECK_FALSE(m.traits.time_independent);
        CHECK(m.traits.has_b);
        CHECK(m.traits.fast_independent_of_x);
        CHECK(m.meta.flag("hx6"));
        CHECK(m.scales.beta == doctest::Approx(1.0 / 3.0));
        const double x = 0.5, y = 2.0, t = 1.1;
        CHECK(eval_slow_drift(m, t, {&x, 1}, {&y, 1})[0] ==
              doctest::Approx(-x - x * x * x + y * (std::cos(t) + std::sin(std::sqrt(2.0) * t))));
        CHECK(eval_intermediate_drift(m, {&x, 1}, {&y, 1})[0] == doctest::Approx(x + y));
        CHECK_FALSE(example_5_2({.a4 = 1.0}).meta.flag("hx6"));
    }

    TEST_CASE("linear OU eta follows the fast rate") {
        CHECK(linear_ou({.fast_rate = 3.0}).meta.require("eta") == 6.0);
        CHECK(linear_ou().traits.fast_independent_of_x);
    }

    TEST_CASE("vanderpol rejects mu <= 1 and warns for large eps") {
        CHECK_THROWS(vanderpol_to_system(1.0, 1.0, 1.0));
        CHECK_FALSE(vanderpol_to_system(1.5, 1.0, 1.0).warnings.empty());
        const ModelSpec m = vanderpol_to_system(10.0, 1.0, 1.0);
        CHECK(m.scales.epsilon == doctest::Approx(0.01));
        CHECK(m.warnings.empty());
    }

    TEST_CASE("registry") {
        for (const auto& id : registry_ids()) CHECK(builtin_model(id).id == id);
        try {
            (void)builtin_model("nope");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("example-5-1") != std::string::npos);
        }
    }

    TEST_CASE("assumption meta rejects unknown names and requires declared ones") {
        AssumptionMeta meta;
        CHECK_THROWS_AS(meta.set("zeta", 1.0), ConfigError);
        CHECK_THROWS_AS(meta.set_flag("hx9"), ConfigError);
        try {
            (void)meta.require("K3");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("K3") != std::string::npos);
        }
        meta.set("eta", -1.0);
        CHECK_THROWS(meta.validate());
    }

    TEST_CASE("with_epsilon keeps the other exponents") {
        const ModelSpec m = example_5_2().with_epsilon(0.04);
        CHECK(m.scales.epsilon == 0.04);
        CHECK(m.scales.beta == doctest::Approx(1.0 / 3.0));
    }
}

TEST_SUITE("probe") {
    TEST_CASE("declared constants of the built-in models survive probing") {
        const ProbeSampler s{.n_points = 2000, .lo = -3.0, .hi = 3.0, .seed = 5};
        for (auto a : {Assumption::Hy1, Assumption::Hy2, Assumption::Hy3}) {
            const auto r = probe_assumption(example_5_1(), a, s);
            CHECK_MESSAGE(r.passed(), to_string(a));
            CHECK(r.n_points > 0);
        }
        CHECK(probe_assumption(example_5_2(), Assumption::Hx6, s).passed());
        CHECK(probe_assumption(linear_ou({.slow_rate = 1.0, .sigma = 1.0}), Assumption::Hy3, s).passed());
    }

    TEST_CASE("a false declaration is falsified with a witness") {
        ModelSpec m = example_5_1();
        m.meta.set("eta", 50.0);
        const auto r = probe_assumption(m, Assumption::Hy3, {.n_points = 2000, .seed = 3});
        CHECK_FALSE(r.passed());
        CHECK(r.worst_margin > 0.0);
        REQUIRE(r.witness.has_value());
        CHECK(r.witness->size() == 4);  // t, x, y, y2
    }

    TEST_CASE("missing constants name the symbol") {
        try {
            (void)probe_assumption(example_5_1(), Assumption::Hx6);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("lambda1") != std::string::npos);
        }
    }

    TEST_CASE("zero points is no evidence") {
        const auto r = probe_assumption(example_5_1(), Assumption::Hy2, {.n_points = 0});
        CHECK(r.no_evidence);
        CHECK(r.passed());
    }

    TEST_CASE("assumption names round-trip") {
        for (auto a : all_assumptions()) CHECK(parse_assumption(to_string(a)) == a);
        CHECK_THROWS_AS(parse_assumption("Hz1"), ConfigError);
    }
}
