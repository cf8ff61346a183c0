#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace msde {

enum class Tolerance { Absolute, Relative, KSe };

struct Measurement {
    double value = 0.0;
    double se = 0.0;
};

/// One closed-form quantity checked against a library estimator.
struct OracleCase {
    std::string name;
    double expected = 0.0;
    Tolerance policy = Tolerance::Absolute;
    double tol = 0.0;        // absolute bound, relative bound, or multiple of SE
    std::string derivation;  // how `expected` was obtained
    std::function<Measurement(std::uint64_t seed, unsigned threads)> measure;
};

struct OracleResult {
    std::string name;
    double expected = 0.0;
    double measured = 0.0;
    double se = 0.0;
    double allowed = 0.0;  // resolved absolute bound on |measured - expected|
    bool pass = false;
    std::string derivation;
    std::string error;  // exception text when the estimator threw
};

struct OracleReport {
    std::vector<OracleResult> results;

    [[nodiscard]] bool all_passed() const;
    void write_text(std::ostream& os) const;
    /// JUnit-style XML, one testcase per oracle.
    void write_junit(std::ostream& os) const;
};

[[nodiscard]] std::vector<OracleCase> oracle_cases();

/// Runs every case; failures are results, never exceptions.
[[nodiscard]] OracleReport run_oracle_suite(std::uint64_t seed = 1, unsigned threads = 0);
[[nodiscard]] OracleResult run_oracle(const OracleCase& c, std::uint64_t seed, unsigned threads);

}  // namespace msde
