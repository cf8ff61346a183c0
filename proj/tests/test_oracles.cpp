#include <doctest.h>

#include <set>
#include <sstream>
#include <string>

#include "msde/core.hpp"
#include "msde/oracles.hpp"

using namespace msde;

TEST_SUITE("oracles") {
    TEST_CASE("every oracle case passes") {
        const auto cases = oracle_cases();
        std::set<std::string> names;
        for (const auto& c : cases) {
            CHECK(names.insert(c.name).second);
            CHECK_FALSE(c.derivation.empty());
            const auto r = run_oracle(c, 1, 0);
            INFO(c.name, ": measured ", r.measured, " expected ", r.expected, " allowed ", r.allowed, " ", r.error);
            CHECK(r.pass);
        }
        CHECK(cases.size() >= 10);
    }

    TEST_CASE("a thrown estimator becomes a failed result") {
        OracleCase c{"throws", 1.0, Tolerance::Absolute, 0.1, "none",
                     [](std::uint64_t, unsigned) -> Measurement { throw NumericError("exploded"); }};
        const auto r = run_oracle(c, 1, 0);
        CHECK_FALSE(r.pass);
        CHECK(r.error == "exploded");
        OracleReport rep;
        rep.results.push_back(r);
        CHECK_FALSE(rep.all_passed());
        std::ostringstream txt, xml;
        rep.write_text(txt);
        rep.write_junit(xml);
        CHECK(txt.str().find("FAIL throws") != std::string::npos);
        CHECK(xml.str().find("failures=\"1\"") != std::string::npos);
        CHECK(xml.str().find("<failure message=\"exploded\"/>") != std::string::npos);
    }

    TEST_CASE("tolerance policies") {
        OracleCase c{"rel", 10.0, Tolerance::Relative, 0.1, "d",
                     [](std::uint64_t, unsigned) { return Measurement{10.9, 0.0}; }};
        CHECK(run_oracle(c, 1, 0).pass);
        c.policy = Tolerance::KSe;
        c.tol = 3.0;
        c.measure = [](std::uint64_t, unsigned) { return Measurement{10.9, 0.2}; };
        CHECK_FALSE(run_oracle(c, 1, 0).pass);
    }
}
