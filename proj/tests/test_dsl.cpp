#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "msde/config.hpp"
#include "msde/dsl.hpp"
#include "msde/model.hpp"

using namespace msde;
using namespace msde::dsl;

namespace {

/// Fully parenthesized random expression over t, x1, x2, y1 with nonnegative literals.
std::string random_expr(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 3 : 12);
    std::uniform_int_distribution<int> small(0, 4);
    std::uniform_real_distribution<double> lit(0.0, 3.0);
    const int k = pick(rng);
    switch (k) {
        case 0: return fmt::format("{}", std::round(lit(rng) * 1000.0) / 1000.0);
        case 1: return "x1";
        case 2: return std::uniform_int_distribution<int>(0, 1)(rng) ? "x2" : "t";
        case 3: return "y1";
        case 4: return "-(" + random_expr(rng, depth - 1) + ")";
        case 5: return "sin(" + random_expr(rng, depth - 1) + ")";
        case 6: return "cos(" + random_expr(rng, depth - 1) + ")";
        case 7: return "tanh(" + random_expr(rng, depth - 1) + ")";
        case 8: return "abs(" + random_expr(rng, depth - 1) + ")";
        case 9: return "exp(" + random_expr(rng, std::min(depth - 1, 1)) + ")";
        case 10: return "(" + random_expr(rng, depth - 1) + ")^" + std::to_string(small(rng));
        default: {
            static const char* ops[] = {"+", "-", "*", "/"};
            const char* op = ops[std::uniform_int_distribution<int>(0, 3)(rng)];
            return "(" + random_expr(rng, depth - 1) + ")" + op + "(" + random_expr(rng, depth - 1) + ")";
        }
    }
}

const Signature kSig{.d1 = 2, .d2 = 1};

}  // namespace

TEST_SUITE("dsl") {
    TEST_CASE("precedence and associativity") {
        const Signature none{.d1 = 0, .d2 = 0};
        auto w = [&](const char* s) { return eval_tree(parse(s, none), 0.0, {}, {}); };
        CHECK(w("2^3^2") == 512.0);
        CHECK(w("-2^2") == -4.0);
        CHECK(w("1 - 2 - 3") == -4.0);
        CHECK(w("8 / 4 / 2") == 1.0);
        CHECK(w("2 + 3 * 4") == 14.0);
        CHECK(w("(2 + 3) * 4") == 20.0);
        CHECK(w("1.5e1") == 15.0);
    }

    TEST_CASE("errors carry line and column") {
        try {
            (void)parse("");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("empty expression") != std::string::npos);
        }
        try {
            (void)parse("x1 +\n  z3");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.span().line == 2);
            CHECK(e.span().col == 3);
            CHECK(std::string(e.what()).rfind("2:3:", 0) == 0);
            CHECK(std::string(e.what()).find("x1") != std::string::npos);
        }
        CHECK_THROWS_AS(parse("x1 +"), ParseError);
        CHECK_THROWS_AS(parse("sin x1"), ParseError);
        CHECK_THROWS_AS(parse("(x1"), ParseError);
        CHECK_THROWS_AS(parse("x1 ^ y1"), ParseError);
        CHECK_THROWS_AS(parse("x1 ^ 2.5"), ParseError);
        CHECK_THROWS_AS(parse("x2"), ParseError);  // d1 = 1
        CHECK_THROWS_AS(parse("y1", {.allow_y = false}), ParseError);
        CHECK_THROWS_AS(parse("t", {.allow_t = false}), ParseError);
        CHECK_THROWS_AS(parse("x1 $ 2"), ParseError);
        CHECK_THROWS_AS(parse(std::string(300, '(') + "1" + std::string(300, ')')), ParseError);
        std::string deep = "x1";
        for (int i = 0; i < 70; ++i) deep = "sin(" + deep + ")";
        CHECK_THROWS_AS(parse(deep), ParseError);
        CHECK_NOTHROW(parse(std::string(100, '(') + "1" + std::string(100, ')')));
    }

    TEST_CASE("division by zero reports the span") {
        const Ast a = parse("1 + x1/0.0");
        const double x = 1.0, y = 0.0;
        try {
            (void)Compiled(a)(0.0, {&x, 1}, {&y, 1});
            FAIL("expected EvalError");
        } catch (const EvalError& e) {
            CHECK(e.span().offset == 4);
            CHECK(e.span().col == 5);
        }
        CHECK_THROWS_AS(eval_tree(a, 0.0, {&x, 1}, {&y, 1}), EvalError);
        CHECK_THROWS_AS(eval_tree(parse("exp(x1)"), 0.0, std::vector<double>{1000.0}, {&y, 1}), EvalError);
    }

    TEST_CASE("usage analysis") {
        const Usage u = usage(parse("x2 * sin(t) + 1", kSig));
        CHECK(u.t);
        CHECK(u.x == std::vector<bool>{false, true});
        CHECK_FALSE(u.any_y());
    }

    TEST_CASE("constant folding") {
        const Compiled c(parse("2*3 + sin(0) + x1*(1+1)"));
        const double x = 4.0, y = 0.0;
        CHECK(c(0.0, {&x, 1}, {&y, 1}) == 14.0);
        CHECK(c.program_size() == 5);
        CHECK(Compiled(parse("exp(1)^2")).is_constant());
        CHECK_THROWS_AS(Compiled(parse("x1"))(0.0, std::vector<double>{1.0, 2.0}, {&y, 1}), ContractViolation);
    }

    TEST_CASE("print/parse round trip on a random corpus") {
        std::mt19937_64 rng(2024);
        for (int i = 0; i < 1000; ++i) {
            const std::string src = random_expr(rng, 6);
            const Ast a = parse(src, kSig);
            const std::string printed = print(a);
            const Ast b = parse(printed, kSig);
            INFO(src, " -> ", printed);
            CHECK(same_structure(a, b));
            CHECK(print(b) == printed);
        }
    }

    TEST_CASE("compiled and tree evaluation agree on a random corpus") {
        std::mt19937_64 rng(77);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        int compared = 0;
        for (int i = 0; i < 1000; ++i) {
            const Ast a = parse(random_expr(rng, 5), kSig);
            const Compiled c(a);
            const std::vector<double> x{u(rng), u(rng)}, y{u(rng)};
            const double t = u(rng);
            bool tree_failed = false, compiled_failed = false;
            double vt = 0.0, vc = 0.0;
            try {
                vt = eval_tree(a, t, x, y);
            } catch (const EvalError&) {
                tree_failed = true;
            }
            try {
                vc = c(t, x, y);
            } catch (const EvalError&) {
                compiled_failed = true;
            }
            INFO(print(a));
            CHECK(tree_failed == compiled_failed);
            if (!tree_failed && !compiled_failed) {
                ++compared;
                CHECK(vc == doctest::Approx(vt).epsilon(1e-12).scale(1.0));
            }
        }
        CHECK(compared > 800);
    }

    TEST_CASE("DSL models reproduce the built-in example 5.1") {
        const auto cfg = load_config_text(R"J({"model": {
            "id": "example-5-1-dsl", "d1": 1, "d2": 1,
            "scales": {"alpha": 0.5, "beta": 0, "gamma": 0.5, "epsilon": 0.01},
            "f": ["x1 - x1^3 + y1^2*sin(x1) + y1"], "sigma": [["1"]],
            "B": ["-sin(x1)^2*y1^5 - y1^3 - y1"], "g": [["1"]],
            "meta": {"eta": 2, "theta": 4, "K1": 1}}})J");
        const ModelSpec builtin = example_5_1();
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (int i = 0; i < 1000; ++i) {
            const double x = u(rng), y = u(rng), t = u(rng);
            CHECK(eval_slow_drift(cfg.model, t, {&x, 1}, {&y, 1})[0] ==
                  doctest::Approx(eval_slow_drift(builtin, t, {&x, 1}, {&y, 1})[0]).epsilon(1e-12));
            CHECK(eval_fast_drift(cfg.model, {&x, 1}, {&y, 1})[0] ==
                  doctest::Approx(eval_fast_drift(builtin, {&x, 1}, {&y, 1})[0]).epsilon(1e-12));
        }
        CHECK(cfg.model.traits.time_independent);
        CHECK(cfg.model.traits.sigma_constant);
        CHECK_FALSE(cfg.model.traits.fast_independent_of_x);
    }
}
