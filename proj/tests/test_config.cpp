#include <doctest.h>

#include <filesystem>
#include <string>

#include "msde/config.hpp"
#include "msde/io.hpp"

using namespace msde;

namespace {

std::string error_of(const std::string& text) {
    try {
        (void)load_config_text(text, "cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

const char* kCustom = R"J({"model": {"id": "toy", "d1": 1, "d2": 1, "f": ["-x1 + y1"], "sigma": [["0.5"]],
                          "B": ["-y1"], "g": [["1"]], "meta": {"eta": 2}}})J";

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("builtin form with parameters") {
        const auto c = load_config_text(
            R"J({"model": {"builtin": "example-5-2", "epsilon": 0.04, "params": {"a1": 2}}})J");
        CHECK(c.model.id == "example-5-2");
        CHECK(c.model.scales.epsilon == 0.04);
        REQUIRE(c.averaged.has_value());
        CHECK(c.averaged->lambda1 == 2.0);
        const auto nonlinear = load_config_text(R"J({"model": {"builtin": "example-5-2", "params": {"a3": 1}}})J");
        CHECK_FALSE(nonlinear.averaged.has_value());
        CHECK(builtin_config("linear-ou").averaged.has_value());
        CHECK_FALSE(builtin_config("vanderpol").averaged.has_value());
    }

    TEST_CASE("custom form") {
        const auto c = load_config_text(kCustom);
        CHECK(c.model.id == "toy");
        CHECK(c.model.traits.fast_independent_of_x);
        CHECK(c.model.traits.sigma_constant);
        CHECK_FALSE(c.model.traits.has_b);
        const double x = 1.0, y = 3.0;
        CHECK(eval_slow_drift(c.model, 0.0, {&x, 1}, {&y, 1})[0] == 2.0);
        CHECK(eval_slow_diffusion(c.model, 0.0, {&x, 1})(0, 0) == 0.5);
        CHECK_FALSE(c.averaged.has_value());
    }

    TEST_CASE("unknown keys are rejected with their path") {
        CHECK(contains(error_of(R"J({"model": {"builtin": "linear-ou"}, "extra": 1})J"), "unknown key 'extra'"));
        CHECK(contains(error_of(R"J({"model": {"builtin": "linear-ou", "params": {"rate": 1}}})J"),
                       "cfg:model.params"));
        const std::string e = error_of(R"J({"model": {"id": "toy", "d1": 1, "d2": 1, "f": ["y1"],
            "sigma": [["1"]], "B": ["-y1"], "g": [["1"]], "scales": {"alpha": 0.5, "delta": 1}}})J");
        CHECK(contains(e, "cfg:model.scales"));
        CHECK(contains(e, "delta"));
        CHECK(contains(error_of(R"J({"model": {"builtin": "linear-ou"}, "averaged": {"f_bar": ["0"],
            "sigma_bar": [["1"]], "rate": 1}})J"), "cfg:averaged"));
    }

    TEST_CASE("schema errors") {
        CHECK(contains(error_of("{"), "invalid JSON"));
        CHECK(contains(error_of("{}"), "missing 'model'"));
        CHECK(contains(error_of(R"J({"model": {"builtin": "nope"}})J"), "example-5-1"));
        CHECK(contains(error_of(R"J({"model": {"id": "toy", "d1": 1, "d2": 1, "f": ["y1", "y1"],
            "sigma": [["1"]], "B": ["-y1"], "g": [["1"]]}})J"), "cfg:model.f"));
        CHECK(contains(error_of(R"J({"model": {"id": "toy", "d1": 1, "d2": 1, "f": ["y1 + q"],
            "sigma": [["1"]], "B": ["-y1"], "g": [["1"]]}})J"), "unknown identifier 'q'"));
        CHECK(contains(error_of(R"J({"model": {"id": "toy", "d1": 1, "d2": 1, "f": ["y1"],
            "sigma": [["y1"]], "B": ["-y1"], "g": [["1"]]}})J"), "cfg:model.sigma"));
        CHECK(contains(error_of(R"J({"model": {"id": "toy", "d1": 1, "d2": 1, "f": ["y1*cos(t)"],
            "sigma": [["1"]], "B": ["-y1"], "g": [["1"]]}})J"), "forcing_frequencies"));
        CHECK(contains(error_of(R"J({"model": {"id": "toy", "d1": 1, "d2": 1, "f": ["y1"],
            "sigma": [["1"]], "B": ["-y1"], "g": [["1"]], "meta": {"zeta": 1}}})J"), "zeta"));
        CHECK(contains(error_of(R"J({"model": {"id": "toy", "d1": 1, "d2": 1, "f": ["y1"],
            "sigma": [["1"]], "B": ["-y1"], "g": [["1"]], "meta": {"flags": ["hx7"]}}})J"), "hx7"));
        CHECK(contains(error_of(R"J({"model": {"builtin": "example-5-2", "epsilon": 2}})J"), "epsilon"));
    }

    TEST_CASE("hash is insensitive to whitespace and key order") {
        const auto a = load_config_text(R"J({"model":{"builtin":"linear-ou","params":{"sigma":1,"slow_rate":1}}})J");
        const auto b = load_config_text(R"J({
            "model": { "params": { "slow_rate": 1, "sigma": 1 }, "builtin": "linear-ou" } })J");
        CHECK(a.hash == b.hash);
        CHECK(a.hash.size() == 16);
        CHECK(a.hash != load_config_text(R"J({"model":{"builtin":"linear-ou"}})J").hash);
    }

    TEST_CASE("files") {
        const auto p = std::filesystem::temp_directory_path() / "msde-config-test.json";
        io::write_file(p, kCustom);
        CHECK(load_config_file(p).model.id == "toy");
        std::filesystem::remove(p);
        CHECK_THROWS_AS(load_config_file(p), ConfigError);
    }
}
