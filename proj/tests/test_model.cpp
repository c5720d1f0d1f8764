#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfg/lq.hpp"
#include "mfg/model.hpp"
#include "oracles.hpp"

using namespace mfg;

namespace {

// b = coef a (or x^2), sigma const, f = -a^2, g = 0 toy models for the
// assumption validators.
MFGModel toy_model(std::function<double(double x, double a)> drift, double sigma,
                   std::function<double(double a)> reward, GrowthConstants gc,
                   ControlSpace controls) {
    return MFGModel{
        .dim = 1,
        .noise_dim = 1,
        .horizon = 1.0,
        .initial_law = DiscreteMeasure::dirac1d(0.0),
        .drift = [drift](double, const double* x, const DiscreteMeasure&, const double* a, double* out) {
            out[0] = drift(x[0], a[0]);
        },
        .volatility = [sigma](double, const double*, const DiscreteMeasure&, const double*, double* out) {
            out[0] = sigma;
        },
        .running_reward = [reward](double, const double*, const DiscreteMeasure&, const double* a) {
            return reward(a[0]);
        },
        .terminal_reward = [](const double*, const DiscreteMeasure&) { return 0.0; },
        .constants = gc,
        .controls = std::move(controls),
        .drift_mu_free = true,
        .volatility_mu_free = true,
        .running_reward_mu_free = true,
        .terminal_reward_mu_free = true,
    };
}

}  // namespace

TEST_CASE("GrowthConstants invariants") {
    CHECK_NOTHROW(GrowthConstants(1, 1, 1, 2, 2, 0));
    CHECK_FALSE(GrowthConstants(1, 1, 1, 2, 2, 0).p_prime_gt_p());
    CHECK(GrowthConstants(1, 1, 1, 1, 2, 0).p_prime_gt_p());
    CHECK_THROWS(GrowthConstants(0, 1, 1, 1, 2, 0));   // c1 > 0
    CHECK_THROWS(GrowthConstants(1, 1, 1, 0.5, 2, 0)); // p >= 1
    CHECK_THROWS(GrowthConstants(1, 1, 1, 1, 2, 1.5)); // p >= p_sigma
    CHECK_THROWS(GrowthConstants(1, 1, 1, 2, 2, 3));   // p_sigma <= 2
}

TEST_CASE("ControlSpace invariants") {
    CHECK_THROWS(ControlSpace(1, {}, 1.0, false));
    CHECK_THROWS(ControlSpace(1, {0.5, 0.5}, 1.0, false));  // duplicate
    CHECK_THROWS(ControlSpace(1, {2.0}, 1.0, false));       // outside bound
    const auto cs = ControlSpace::uniform_1d(-2.0, 2.0, 41, true);
    CHECK(cs.count() == 41);
    CHECK(cs.scalar_atom(0) == -2.0);
    CHECK(cs.scalar_atom(40) == 2.0);
    CHECK(cs.scalar_atom(cs.default_atom()) == 0.0);
    const auto no_zero = ControlSpace::uniform_1d(1.0, 2.0, 3, false);
    CHECK(no_zero.default_atom() == 0);
}

TEST_CASE("validate_growth: bounded toy model passes identically") {
    // b = 0, sigma = 1, f = -a^2, constants (1,1,1), p = 1, p' = 2
    auto model = toy_model([](double, double) { return 0.0; }, 1.0,
                           [](double a) { return -a * a; }, GrowthConstants(1, 1, 1, 1, 2, 0),
                           ControlSpace::uniform_1d(-1.0, 1.0, 5, true));
    const DiscreteMeasure mu = DiscreteMeasure::dirac1d(0.5);
    std::vector<GrowthSample> samples;
    for (double x : {-2.0, 0.0, 1.0, 3.0})
        for (double a : {-1.0, 0.0, 1.0}) {
            GrowthSample s;
            s.t = 0.5;
            s.x = {x, 0.0};
            s.mu = &mu;
            s.a = {a, 0.0};
            samples.push_back(s);
        }
    const auto report = validate_growth(model, samples);
    CHECK(report.all_pass);
    CHECK(report.p_prime_gt_p);
}

TEST_CASE("validate_growth: quadratic drift fails the linear-growth bound with slack 1") {
    auto model = toy_model([](double x, double) { return x * x; }, 1.0,
                           [](double) { return 0.0; }, GrowthConstants(1, 1, 1, 1, 2, 0),
                           ControlSpace::uniform_1d(0.0, 0.0, 1, false));
    const DiscreteMeasure mu = DiscreteMeasure::dirac1d(0.0);
    GrowthSample s;
    s.t = 0.0;
    s.x = {2.0, 0.0};
    s.mu = &mu;
    s.a = {0.0, 0.0};
    const auto report = validate_growth(model, {&s, 1});
    const auto* drift = report.find("drift_growth");
    REQUIRE(drift != nullptr);
    CHECK_FALSE(drift->pass);
    // |b| = 4 against c1 (1 + |x| + |mu|_1 + |a|) = 1 + 2 + 0 + 0 = 3
    CHECK(drift->worst_slack == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("validate_growth: LQ reward bounds need p = 2, not p = 1") {
    const auto lattice = StateLattice::make_1d(-12.0, 12.0, 0.5);
    const lq::LQSpec spec(1.0, 1.0, 0.1, 1.0, 0.25);
    MFGModel model = lq_model(spec, lattice, ControlSpace::uniform_1d(-2.0, 2.0, 21, true));
    const DiscreteMeasure mu = DiscreteMeasure::dirac1d(1.0);
    std::vector<GrowthSample> samples;
    for (double x : {-10.0, -2.0, 0.0, 2.0, 10.0}) {
        GrowthSample s;
        s.t = 0.0;
        s.x = {x, 0.0};
        s.mu = &mu;
        s.a = {2.0, 0.0};
        samples.push_back(s);
    }
    const auto ok = validate_growth(model, samples);
    CHECK(ok.find("terminal_bound")->pass);
    CHECK(ok.find("running_upper")->pass);
    CHECK_FALSE(ok.p_prime_gt_p);  // p = p' = 2 recorded as a violation

    MFGModel wrong = model;
    wrong.constants = GrowthConstants(1.0, model.constants.c2, 1.0, 1.0, 2.0, 0.0);  // claims p = 1
    const auto bad = validate_growth(wrong, samples);
    CHECK_FALSE(bad.find("terminal_bound")->pass);  // quadratic g beats the linear bound at |x| = 10
}

TEST_CASE("check_convexity: worked examples") {
    const DiscreteMeasure mu = DiscreteMeasure::dirac1d(0.0);
    const double x0 = 0.0;

    // b = a, sigma const, f = -a^2, A = {-1, 0, 1}: the half/half mix of the
    // extremes is matched exactly by a = 0 with f surplus 1.
    auto affine = toy_model([](double, double a) { return a; }, 1.0,
                            [](double a) { return -a * a; }, GrowthConstants(1, 1, 1, 1, 2, 0),
                            ControlSpace(1, {-1.0, 0.0, 1.0}, 1.0, true));
    ConvexityOptions opts;
    opts.draws = 0;
    opts.tol_match = 1e-9;
    opts.tol_f = 1e-9;
    opts.combinations = {{0.5, 0.0, 0.5}};
    auto rep = check_convexity(affine, 0.0, &x0, mu, opts);
    CHECK(rep.status == ConvexityStatus::Pass);
    CHECK(rep.worst_match_err <= 1e-12);
    CHECK(rep.worst_f_gap == doctest::Approx(1.0).epsilon(1e-12));

    // b = a^3 on the same atoms: barycenter 0 still lands on a = 0.
    auto cubic = toy_model([](double, double a) { return a * a * a; }, 1.0,
                           [](double) { return 0.0; }, GrowthConstants(1, 1, 1, 1, 2, 0),
                           ControlSpace(1, {-1.0, 0.0, 1.0}, 1.0, true));
    rep = check_convexity(cubic, 0.0, &x0, mu, opts);
    CHECK(rep.status == ConvexityStatus::Pass);
    CHECK(rep.worst_match_err <= 1e-12);

    // A = {-1, 1}: the midpoint drift 0 has no matching atom; gap 1.
    auto gap = toy_model([](double, double a) { return a; }, 1.0,
                         [](double) { return 0.0; }, GrowthConstants(1, 1, 1, 1, 2, 0),
                         ControlSpace(1, {-1.0, 1.0}, 1.0, true));
    ConvexityOptions opts2;
    opts2.draws = 0;
    opts2.tol_match = 1e-9;
    opts2.combinations = {{0.5, 0.5}};
    rep = check_convexity(gap, 0.0, &x0, mu, opts2);
    CHECK(rep.status == ConvexityStatus::Fail);
    CHECK(rep.worst_match_err == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("check_convexity: random draws pass on the LQ control grid") {
    const auto lattice = StateLattice::make_1d(-1.0, 3.0, 0.1);
    const lq::LQSpec spec(1.0, 1.0, 0.1, 1.0, 0.25);
    MFGModel model = lq_model(spec, lattice, ControlSpace::uniform_1d(-2.0, 2.0, 41, true));
    const double x0 = 1.0;
    const auto rep = check_convexity(model, 0.0, &x0, model.initial_law);
    CHECK(rep.status == ConvexityStatus::Pass);
}

TEST_CASE("lq_model: worked examples") {
    const auto lattice = StateLattice::make_1d(-2.0, 2.0, 0.05);
    const auto controls = ControlSpace::uniform_1d(-2.0, 2.0, 21, true);

    const lq::LQSpec critical(1.0, -2.0, 0.1, 1.0, 0.25);
    CHECK(critical.c == doctest::Approx(lq::critical_c(1.0)));
    const MFGModel mc = lq_model(critical, lattice, controls);
    CHECK_FALSE(mc.constants.p_prime_gt_p());

    const lq::LQSpec plain(1.0, 1.0, 0.1, 1.0, 0.25);
    const MFGModel mp = lq_model(plain, lattice, controls);
    const DiscreteMeasure mu = DiscreteMeasure::dirac1d(1.0);  // mean 1
    double x = 0.7, a = -1.3, out = 0.0;
    mp.drift(0.3, &x, mu, &a, &out);
    CHECK(out == a);  // b( . , . , . , a) = a everywhere
    x = 0.0;
    CHECK(mp.terminal_reward(&x, mu) == doctest::Approx(-1.0).epsilon(1e-15));  // -(0 + 1)^2

    CHECK_THROWS(lq::LQSpec(-1.0, 0.0, 0.1, 0.0, 0.0));
}

TEST_CASE("evaluator purity: repeated calls are bitwise equal") {
    const auto lattice = StateLattice::make_1d(-2.0, 2.0, 0.05);
    const lq::LQSpec spec(1.0, 0.7, 0.3, 0.4, 0.25);
    const MFGModel model = lq_model(spec, lattice, ControlSpace::uniform_1d(-1.0, 1.0, 11, true));
    const DiscreteMeasure mu = model.initial_law;
    double x = 0.35, a = -0.4, b1, b2, s1, s2;
    model.drift(0.2, &x, mu, &a, &b1);
    model.drift(0.2, &x, mu, &a, &b2);
    model.volatility(0.2, &x, mu, &a, &s1);
    model.volatility(0.2, &x, mu, &a, &s2);
    CHECK(b1 == b2);
    CHECK(s1 == s2);
    CHECK(model.running_reward(0.2, &x, mu, &a) == model.running_reward(0.2, &x, mu, &a));
    CHECK(model.terminal_reward(&x, mu) == model.terminal_reward(&x, mu));
}

TEST_CASE("discretize_gaussian_1d: mass, mean, dirac collapse") {
    const auto lattice = StateLattice::make_1d(-2.0, 4.0, 0.02);
    const auto mu = discretize_gaussian_1d(lattice, 1.0, 0.04);
    CHECK(mu.total_mass() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(mu.mean() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(moment(mu, 2.0) - mu.mean() * mu.mean() == doctest::Approx(0.04).epsilon(1e-3));

    const auto point = discretize_gaussian_1d(lattice, 0.505, 0.0);
    REQUIRE(point.size() == 1);
    CHECK(point.coord(0, 0) == doctest::Approx(0.5).epsilon(1e-12));  // snapped to the nearest node
}
