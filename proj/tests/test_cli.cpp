#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "msde/io.hpp"

#ifndef MSDE_CLI_PATH
#error "MSDE_CLI_PATH must point at the msde executable"
#endif

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "msde-cli-tests" / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

int run(const std::string& args, const fs::path& out) {
    const std::string cmd =
        fmt::format("\"{}\" {} --out \"{}\" > \"{}.log\" 2>&1", MSDE_CLI_PATH, args, out.string(), out.string());
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string log_of(const fs::path& out) { return msde::io::read_file(out.string() + ".log"); }

/// Files in the directory must be exactly the manifest's outputs plus manifest.json.
void check_manifest(const fs::path& out, const std::string& command) {
    const auto m = nlohmann::json::parse(msde::io::read_file(out / "manifest.json"));
    CHECK(m["command"] == command);
    for (const char* key : {"argv", "config_hash", "seed", "versions", "wall_time_seconds", "outputs"})
        CHECK_MESSAGE(m.contains(key), key);
    std::set<std::string> listed{"manifest.json"}, present;
    for (const auto& o : m["outputs"]) listed.insert(o.get<std::string>());
    for (const auto& e : fs::directory_iterator(out)) present.insert(e.path().filename().string());
    CHECK(listed == present);
}

}  // namespace

TEST_CASE("simulate writes a path and a manifest, reruns are byte identical") {
    const auto a = scratch("sim-a"), b = scratch("sim-b");
    const std::string args = "simulate --model example-5-1 --eps 0.01 --horizon 0.5 --seed 3";
    REQUIRE(run(args, a) == 0);
    REQUIRE(run(args + " --threads 2", b) == 0);
    check_manifest(a, "simulate");
    CHECK(msde::io::read_file(a / "path.csv") == msde::io::read_file(b / "path.csv"));
    CHECK(msde::io::read_file(a / "path.csv").rfind("# model=example-5-1,epsilon=0.01,seed=3\n", 0) == 0);
}

TEST_CASE("strong-rate, gfun, deviation, longtime and plot") {
    const auto s = scratch("strong");
    REQUIRE(run("strong-rate --model linear-ou --eps-list 0.25,0.125,0.0625 --paths 50", s) == 0);
    check_manifest(s, "strong-rate");
    CHECK(fs::exists(s / "strong_rate.json"));

    const auto g = scratch("gfun");
    REQUIRE(run("gfun --model linear-ou --x-grid 0,1 --draws 200 --method poisson-rep", g) == 0);
    check_manifest(g, "gfun");
    CHECK(msde::io::read_file(g / "gfun.csv").rfind("x,method,gg_t,se,opposite_sign,clipped\n", 0) == 0);

    const auto d = scratch("dev");
    REQUIRE(run("deviation --model linear-ou --eps 0.04 --paths 500 --g-draws 100 --times 4", d) == 0);
    check_manifest(d, "deviation");

    const auto l = scratch("lt");
    REQUIRE(run("longtime --model example-5-2 --eps-list 0.04 --paths 40 --stationary 100 --times 2 --bootstrap 2",
                l) == 0);
    check_manifest(l, "longtime");

    const auto p = scratch("plot");
    REQUIRE(run(fmt::format("plot --in \"{}\"", (s / "strong_rate.csv").string()), p) == 0);
    check_manifest(p, "plot");
    CHECK(msde::io::read_file(p / "strong_rate.svg").find("<svg") != std::string::npos);
}

TEST_CASE("config files drive every command") {
    const auto dir = scratch("cfg");
    fs::create_directories(dir);
    const fs::path cfg = dir / "toy.json";
    msde::io::write_file(cfg, R"J({"model": {"id": "toy", "d1": 1, "d2": 1,
        "scales": {"alpha": 0.5, "beta": 0, "gamma": 0.5, "epsilon": 0.05},
        "f": ["-x1 + y1"], "sigma": [["1"]], "B": ["-y1"], "g": [["sqrt2"]],
        "meta": {"eta": 2, "theta": 2, "K1": 2}}, "averaged": {"f_bar": ["-x1"], "sigma_bar": [["1"]]}})J");
    const auto out = dir / "out";
    // sqrt2 is not a DSL name.
    CHECK(run(fmt::format("simulate --config \"{}\"", cfg.string()), out) == 2);
    CHECK(log_of(out).find("sqrt2") != std::string::npos);
    msde::io::write_file(cfg, R"J({"model": {"id": "toy", "d1": 1, "d2": 1,
        "scales": {"alpha": 0.5, "beta": 0, "gamma": 0.5, "epsilon": 0.05},
        "f": ["-x1 + y1"], "sigma": [["1"]], "B": ["-y1"], "g": [["1.4142135623730951"]],
        "meta": {"eta": 2, "theta": 2, "K1": 2}}, "averaged": {"f_bar": ["-x1"], "sigma_bar": [["1"]]}})J");
    CHECK(run(fmt::format("strong-rate --config \"{}\" --eps-list 0.1,0.05,0.025 --paths 50", cfg.string()), out) ==
          0);
    const auto m = nlohmann::json::parse(msde::io::read_file(out / "manifest.json"));
    CHECK(m["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("exit codes") {
    const auto out = scratch("codes");
    CHECK(run("simulate --model nope", out) == 2);
    CHECK(log_of(out).find("example-5-1") != std::string::npos);
    CHECK(run("simulate --model example-5-1 --bogus 1", out) == 2);
    CHECK(run("strong-rate --model example-5-1 --eps-list 0.1,0.2,0.05", out) == 2);
    CHECK(run("simulate --config /nonexistent/file.json", out) == 2);
    CHECK(run("check --model example-5-1 --points 500", out) == 0);

    // A falsified declaration makes check exit 1.
    const auto dir = scratch("codes-cfg");
    fs::create_directories(dir);
    const fs::path cfg = dir / "bad.json";
    msde::io::write_file(cfg, R"J({"model": {"id": "bad", "d1": 1, "d2": 1, "f": ["y1"], "sigma": [["1"]],
        "B": ["-y1"], "g": [["1"]], "meta": {"eta": 10, "theta": 2, "K1": 1, "K2": 1}}})J");
    CHECK(run(fmt::format("check --config \"{}\" --points 500", cfg.string()), dir / "out") == 1);
    CHECK(fs::exists(dir / "out" / "check.csv"));
}

TEST_CASE("oracles command writes text and JUnit reports") {
    const auto out = scratch("oracles");
    REQUIRE(run("oracles", out) == 0);
    check_manifest(out, "oracles");
    CHECK(msde::io::read_file(out / "oracles.txt").find("oracle cases passed") != std::string::npos);
    CHECK(msde::io::read_file(out / "oracles.xml").find("failures=\"0\"") != std::string::npos);
}
