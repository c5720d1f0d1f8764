#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mfg/measures.hpp"
#include "oracles.hpp"

using namespace mfg;

namespace {

DiscreteMeasure make1d(std::vector<double> xs, std::vector<double> ms) {
    return DiscreteMeasure(1, std::move(xs), std::move(ms));
}

}  // namespace

TEST_CASE("construction enforces the mass tolerance and distinct atoms") {
    CHECK_THROWS(make1d({0.0, 1.0}, {0.7, 0.2}));          // total 0.9
    CHECK_THROWS(make1d({0.0, 0.0}, {0.5, 0.5}));          // duplicate point
    CHECK_THROWS(make1d({0.0, 1.0}, {1.2, -0.2}));         // negative mass
    CHECK_NOTHROW(make1d({0.0, 1.0}, {0.5, 0.5 + 5e-13}));  // drift below 1e-12
    const auto mu = make1d({0.0, 1.0}, {0.25, 0.75 + 8e-13});
    CHECK(mu.total_mass() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("moment: worked examples") {
    CHECK(moment(DiscreteMeasure::dirac1d(2.0), 2.0) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(moment(make1d({0.0, 2.0}, {0.5, 0.5}), 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    // uniform on {-1, 0, 1}, p = 3: direct summation oracle
    const auto mu = make1d({-1.0, 0.0, 1.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    double direct = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        direct += mu.mass(i) * std::pow(std::abs(mu.coord(i, 0)), 3.0);
    CHECK(direct == doctest::Approx(2.0 / 3).epsilon(1e-15));
    CHECK(moment(mu, 3.0) == doctest::Approx(direct).epsilon(1e-15));
}

TEST_CASE("moment is nondecreasing in p after the 1/p root") {
    std::mt19937_64 rng(41);
    for (int rep = 0; rep < 30; ++rep) {
        const auto mu = oracles::random_measure_1d(rng, 8);
        double prev = 0.0;
        for (double p : {1.0, 1.5, 2.0, 3.0, 4.0}) {
            const double mp = std::pow(moment(mu, p), 1.0 / p);
            CHECK(mp >= prev - 1e-12);
            prev = mp;
        }
    }
}

TEST_CASE("wasserstein: worked examples") {
    const auto mu = make1d({-0.5, 0.25, 2.0}, {0.3, 0.3, 0.4});
    CHECK(wasserstein(mu, mu, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(wasserstein(mu, mu, 2.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(wasserstein(DiscreteMeasure::dirac1d(0.0), DiscreteMeasure::dirac1d(1.0), 1.0) ==
          doctest::Approx(1.0).epsilon(1e-15));
    // 2x1 coupling: every coupling moves half the mass by 1 each way
    CHECK(wasserstein(make1d({0.0, 2.0}, {0.5, 0.5}), DiscreteMeasure::dirac1d(1.0), 1.0) ==
          doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS(wasserstein(mu, mu, 0.5));
}

TEST_CASE("wasserstein_1d: worked examples and error path") {
    CHECK(wasserstein_1d(DiscreteMeasure::dirac1d(0.0), DiscreteMeasure::dirac1d(1.0), 2.0) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(wasserstein_1d(make1d({0.0, 2.0}, {0.5, 0.5}), DiscreteMeasure::dirac1d(1.0), 1.0) ==
          doctest::Approx(1.0).epsilon(1e-14));
    // quantile integral: 3/4 of the mass moves from 4 to 0
    CHECK(wasserstein_1d(make1d({0.0, 4.0}, {0.25, 0.75}), DiscreteMeasure::dirac1d(0.0), 1.0) ==
          doctest::Approx(3.0).epsilon(1e-14));
    const DiscreteMeasure two_d(2, {0.0, 0.0}, {1.0});
    CHECK_THROWS(wasserstein_1d(two_d, two_d, 1.0));
}

TEST_CASE("quantile method equals the transport LP on random 1-d pairs") {
    std::mt19937_64 rng(1234);
    for (int rep = 0; rep < 50; ++rep) {
        const auto mu = oracles::random_measure_1d(rng, 10);
        const auto nu = oracles::random_measure_1d(rng, 10);
        for (double p : {1.0, 2.0}) {
            const double lp = wasserstein(mu, nu, p);
            const double qt = wasserstein_1d(mu, nu, p);
            CHECK(std::abs(lp - qt) <= 1e-9);
        }
    }
}

TEST_CASE("metric axioms on random triples") {
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        const auto a = oracles::random_measure_1d(rng, 10);
        const auto b = oracles::random_measure_1d(rng, 10);
        const auto c = oracles::random_measure_1d(rng, 10);
        for (double p : {1.0, 2.0}) {
            CHECK(wasserstein(a, a, p) == doctest::Approx(0.0).epsilon(1e-12));
            CHECK(wasserstein(a, b, p) == doctest::Approx(wasserstein(b, a, p)).epsilon(1e-12));
            CHECK(wasserstein(a, c, p) <= wasserstein(a, b, p) + wasserstein(b, c, p) + 1e-9);
        }
    }
}

TEST_CASE("wasserstein in d = 2 against hand values") {
    const DiscreteMeasure a(2, {0.0, 0.0}, {1.0});
    const DiscreteMeasure b(2, {3.0, 4.0}, {1.0});
    CHECK(wasserstein(a, b, 1.0) == doctest::Approx(5.0).epsilon(1e-14));
    const DiscreteMeasure c(2, {0.0, 0.0, 1.0, 0.0}, {0.5, 0.5});
    const DiscreteMeasure d(2, {0.0, 1.0, 1.0, 1.0}, {0.5, 0.5});
    CHECK(wasserstein(c, d, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mix: worked examples") {
    const auto mu = make1d({0.0, 1.0}, {0.5, 0.5});
    const auto nu = DiscreteMeasure::dirac1d(1.0);

    const auto same = mix(mu, nu, 0.0);
    REQUIRE(same.size() == 2);
    CHECK(same.mass(0) == doctest::Approx(0.5).epsilon(1e-15));

    const auto half = mix(DiscreteMeasure::dirac1d(0.0), DiscreteMeasure::dirac1d(1.0), 0.5);
    REQUIRE(half.size() == 2);
    CHECK(half.mass(0) == doctest::Approx(0.5).epsilon(1e-15));

    const auto merged = mix(mu, nu, 0.5);
    REQUIRE(merged.size() == 2);
    CHECK(merged.coord(0, 0) == 0.0);
    CHECK(merged.mass(0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(merged.mass(1) == doctest::Approx(0.75).epsilon(1e-15));

    CHECK_THROWS(mix(mu, nu, 1.5));
}

TEST_CASE("mix is linear in the first moment") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int rep = 0; rep < 25; ++rep) {
        const auto mu = oracles::random_measure_1d(rng, 8);
        const auto nu = oracles::random_measure_1d(rng, 8);
        const double w = uni(rng);
        const auto m = mix(mu, nu, w);
        const double expected = (1.0 - w) * mu.mean() + w * nu.mean();
        CHECK(std::abs(m.mean() - expected) <= 1e-12);
    }
}

TEST_CASE("flow_distance: worked examples") {
    const auto d0 = DiscreteMeasure::dirac1d(0.0);
    const auto d1 = DiscreteMeasure::dirac1d(1.0);
    const MeasureFlow f({0.0, 0.5, 1.0}, {d0, d0, d0});
    CHECK(flow_distance(f, f, 1.0) == doctest::Approx(0.0));

    const MeasureFlow g({0.0, 0.5, 1.0}, {d0, d0, d1});
    CHECK(flow_distance(f, g, 1.0) == doctest::Approx(1.0).epsilon(1e-14));

    const MeasureFlow h1({0.0, 1.0}, {d0, d0});
    const MeasureFlow h2({0.0, 1.0}, {make1d({0.5}, {1.0}), make1d({0.2}, {1.0})});
    CHECK(flow_distance(h1, h2, 1.0) == doctest::Approx(0.5).epsilon(1e-14));

    const MeasureFlow other_grid({0.0, 0.3, 1.0}, {d0, d0, d0});
    CHECK_THROWS(flow_distance(f, other_grid, 1.0));
}

TEST_CASE("mollify: symmetry, normalization, coarse-lattice error") {
    const auto lattice = StateLattice::make_1d(-1.0, 1.0, 0.05);
    const int n = 4;  // bandwidth 0.25

    const auto m = mollify(DiscreteMeasure::dirac1d(0.0), n, lattice);
    CHECK(m.total_mass() == doctest::Approx(1.0).epsilon(1e-13));
    double mean = 0.0, radius = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        mean += m.mass(i) * m.coord(i, 0);
        radius = std::max(radius, std::abs(m.coord(i, 0)));
    }
    CHECK(std::abs(mean) <= 1e-15);
    CHECK(radius <= 1.0 / n + 1e-12);

    const auto coarse = StateLattice::make_1d(-1.0, 1.0, 0.5);
    CHECK_THROWS(mollify(DiscreteMeasure::dirac1d(0.0), 4, coarse));
}

TEST_CASE("mollification Wasserstein bound d_p^p <= int |x|^p psi_n") {
    const auto lattice = StateLattice::make_1d(-2.0, 2.0, 0.025);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int n : {2, 5, 10}) {  // cell width 0.025 <= 1/(2n) for n <= 20
        for (int rep = 0; rep < 6; ++rep) {
            std::vector<double> xs, ms;
            const int atoms = 1 + rep % 4;
            for (int i = 0; i < atoms; ++i) {
                xs.push_back(std::round(uni(rng) / 0.025) * 0.025);  // lattice-supported
                ms.push_back(0.2 + std::abs(uni(rng)));
            }
            DiscreteMeasure mu = [&] {
                try {
                    return DiscreteMeasure::normalized(1, xs, ms);
                } catch (const std::invalid_argument&) {
                    return DiscreteMeasure::dirac1d(0.0);  // duplicate draw; degenerate is fine
                }
            }();
            const auto smooth = mollify(mu, n, lattice);
            CHECK(smooth.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
            for (double p : {1.0, 2.0}) {
                const double d = wasserstein(smooth, mu, p);
                const double bound = oracles::mollifier_bound_1d(n, p);
                CHECK(std::pow(d, p) <= bound + 1e-12);
                CHECK(bound <= std::pow(static_cast<double>(n), -p) + 1e-12);
            }
        }
    }
}

TEST_CASE("dump/load round-trip is bitwise for measures and flows") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mfg_measure_io";
    fs::create_directories(dir);

    std::mt19937_64 rng(17);
    const auto mu = oracles::random_measure_1d(rng, 9);
    save_measure(dir / "mu.csv", mu);
    const auto back = load_measure(dir / "mu.csv");
    REQUIRE(back.size() == mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        CHECK(back.coord(i, 0) == mu.coord(i, 0));  // exact
        CHECK(back.mass(i) == mu.mass(i));
    }
    save_measure(dir / "mu2.csv", back);
    std::ifstream f1(dir / "mu.csv"), f2(dir / "mu2.csv");
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());

    const MeasureFlow flow({0.0, 0.25, 1.0},
                           {mu, oracles::random_measure_1d(rng, 5), oracles::random_measure_1d(rng, 7)});
    save_flow(dir / "flow.csv", flow);
    const auto flow_back = load_flow(dir / "flow.csv");
    REQUIRE(flow_back.times.size() == 3);
    CHECK(flow_back.times[1] == 0.25);
    for (int t = 0; t < 3; ++t) {
        REQUIRE(flow_back.marginals[t].size() == flow.marginals[t].size());
        for (std::size_t i = 0; i < flow.marginals[t].size(); ++i)
            CHECK(flow_back.marginals[t].mass(i) == flow.marginals[t].mass(i));
    }
}
