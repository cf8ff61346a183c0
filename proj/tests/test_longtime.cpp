#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "msde/longtime.hpp"

using namespace msde;

TEST_SUITE("longtime") {
    TEST_CASE("stationary law needs lambda1") {
        AveragedModel avg = averaged_example_5_2();
        avg.lambda1.reset();
        CHECK_THROWS_AS(stationary_law(avg, {}, NoisePath{1, 0}), ConfigError);
    }

    TEST_CASE("stationary law is insensitive to the initial condition") {
        StationaryConfig a;
        a.n_samples = 3000;
        a.x0 = {-3.0};
        StationaryConfig b = a;
        b.x0 = {3.0};
        const auto avg = averaged_example_5_2();
        const auto mu = stationary_law(avg, a, NoisePath{4, 0});
        const auto nu = stationary_law(avg, b, NoisePath{4, 1});
        CHECK(mu.size() == 3000);
        CHECK(dbl_distance(mu, nu).value < 0.06);
    }

    TEST_CASE("bootstrap SE is positive and reproducible") {
        const auto avg = averaged_example_5_2();
        StationaryConfig c;
        c.n_samples = 400;
        const auto mu = stationary_law(avg, c, NoisePath{1, 0});
        const auto nu = stationary_law(avg, c, NoisePath{1, 1});
        const double se = dbl_bootstrap_se(mu, nu, 10, 3);
        CHECK(se > 0.0);
        CHECK(se == dbl_bootstrap_se(mu, nu, 10, 3));
        CHECK_THROWS_AS(dbl_bootstrap_se(mu, nu, 1, 3), ContractViolation);
    }

    TEST_CASE("snapshot CSV layout") {
        const std::vector<LawSnapshot> s{{0.5, EmpiricalMeasure::uniform(1, {1.0, 2.0})}};
        std::ostringstream os;
        write_snapshots_csv(os, s);
        CHECK(os.str() == "t,z_1,weight\n0.5,1,0.5\n0.5,2,0.5\n");
    }

    TEST_CASE("sweep refuses models outside its hypotheses") {
        QuasiPeriodicConfig q;
        q.n_paths = 10;
        const std::vector<double> eps{0.04};
        try {
            (void)quasi_periodic_sweep(example_5_1(), averaged_example_5_1(), eps, q);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("Hx6") != std::string::npos);
        }
        ModelSpec m = example_5_2();
        m.scales.beta = 0.5;
        AveragedModel slow = averaged_example_5_2();
        slow.lambda1 = 0.1;  // below L_b^2 / eta = 1/2
        CHECK_THROWS_AS(quasi_periodic_sweep(m, slow, eps, q), ConfigError);
        m.scales.beta = 0.6;
        CHECK_THROWS_AS(quasi_periodic_sweep(m, averaged_example_5_2(), eps, q), ConfigError);
    }

    TEST_CASE("a single epsilon gives a row without a trend claim") {
        QuasiPeriodicConfig q;
        q.n_paths = 60;
        q.n_times = 3;
        q.stationary.n_samples = 200;
        q.bootstrap = 3;
        q.seed = 2;
        const std::vector<double> eps{0.04};
        const auto r = quasi_periodic_sweep(example_5_2(), averaged_example_5_2(), eps, q);
        REQUIRE(r.rows.size() == 1);
        CHECK(r.rows[0].gap_by_t.size() == 3);
        CHECK(r.rows[0].gap > 0.0);
        CHECK(r.rows[0].gap <= 2.0);
        CHECK_FALSE(r.report.fit.has_value());
        CHECK(r.report.metric == Metric::Dbl);
        bool warned = false;
        for (const auto& w : r.report.warnings) warned = warned || w.find("single epsilon") != std::string::npos;
        CHECK(warned);
        const auto again = quasi_periodic_sweep(example_5_2(), averaged_example_5_2(), eps, q);
        CHECK(again.rows[0].gap_by_t == r.rows[0].gap_by_t);
    }
}
