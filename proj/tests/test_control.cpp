#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mfg/control.hpp"
#include "mfg/lq.hpp"
#include "oracles.hpp"

using namespace mfg;

namespace {

MeasureFlow constant_flow(const TimeGrid& grid, const DiscreteMeasure& mu) {
    std::vector<DiscreteMeasure> ms(static_cast<std::size_t>(grid.N) + 1, mu);
    return MeasureFlow(grid.times(), std::move(ms));
}

}  // namespace

TEST_CASE("solve_dp: zero rewards give zero value, ties break to atom 0") {
    auto tm = oracles::random_instance(11, 4, 2, 3);
    std::fill(tm.f.begin(), tm.f.end(), 0.0);
    std::fill(tm.g.begin(), tm.g.end(), 0.0);
    const auto model = tm.build(oracles::node_dirac(tm.lattice, 1));
    const auto flow = constant_flow(tm.timegrid, model.initial_law);
    const auto kernel = build_kernel(model, flow, tm.lattice, tm.timegrid);
    const auto sol = solve_dp(model, flow, kernel);
    CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-15));
    for (int t = 0; t < sol.policy.N; ++t)
        for (int x = 0; x < sol.policy.X; ++x) CHECK(sol.policy.at(t, x) == 0);
    for (double v : sol.value.v) CHECK(v == 0.0);
}

TEST_CASE("solve_dp: one-step identity chain with terminal reward x") {
    // f = 0, g(x) = x, b = sigma = 0, lambda = dirac at node 0 (x = 0):
    // value 0 and the argmax tie resolves to atom index 0.
    auto tm = oracles::random_instance(12, 3, 2, 1);
    std::fill(tm.b.begin(), tm.b.end(), 0.0);
    std::fill(tm.sigma.begin(), tm.sigma.end(), 0.0);
    std::fill(tm.f.begin(), tm.f.end(), 0.0);
    for (int x = 0; x < tm.lattice.size(); ++x) tm.g[x] = tm.lattice.coord(0, x);
    const auto model = tm.build(oracles::node_dirac(tm.lattice, 0));
    const auto flow = constant_flow(tm.timegrid, model.initial_law);
    const auto kernel = build_kernel(model, flow, tm.lattice, tm.timegrid);
    const auto sol = solve_dp(model, flow, kernel);
    CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(sol.policy.at(0, 0) == 0);
}

TEST_CASE("solve_dp matches brute-force policy enumeration") {
    // 3 nodes, 2 actions, 2 steps: 2^(3*2) = 64 Markov policies.
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        auto tm = oracles::random_instance(seed, 3, 2, 2);
        const auto model = tm.build(oracles::node_dirac(tm.lattice, 1));
        const auto flow = constant_flow(tm.timegrid, model.initial_law);
        const auto kernel = build_kernel(model, flow, tm.lattice, tm.timegrid);
        const auto sol = solve_dp(model, flow, kernel);
        const double brute = oracles::brute_force_best_value(model, flow, kernel, tm.lattice);
        CHECK(sol.objective == doctest::Approx(brute).epsilon(1e-12));
    }
}

TEST_CASE("solve_lp: no controllable dynamics reduces to the terminal average") {
    auto tm = oracles::random_instance(31, 5, 2, 3);
    std::fill(tm.b.begin(), tm.b.end(), 0.0);
    std::fill(tm.sigma.begin(), tm.sigma.end(), 0.0);
    std::fill(tm.f.begin(), tm.f.end(), 0.0);
    const auto model = tm.build(oracles::node_dirac(tm.lattice, 2));
    const auto flow = constant_flow(tm.timegrid, model.initial_law);
    const auto kernel = build_kernel(model, flow, tm.lattice, tm.timegrid);
    const auto lp = solve_lp(model, flow, kernel);
    CHECK(lp.objective == doctest::Approx(tm.g[2]).epsilon(1e-12));
    CHECK(occupation_invariant_gap(lp.occupation, kernel, model.initial_law) <= 1e-9);
}

TEST_CASE("LP/DP duality on 20 random small instances") {
    std::mt19937_64 seeds(404);
    for (int rep = 0; rep < 20; ++rep) {
        const int nx = 3 + static_cast<int>(seeds() % 3);   // 3..5 nodes
        const int na = 2 + static_cast<int>(seeds() % 2);   // <= 3 atoms
        const int nt = 1 + static_cast<int>(seeds() % 4);   // <= 4 steps
        auto tm = oracles::random_instance(seeds(), nx, na, nt);
        const auto model = tm.build(oracles::node_dirac(tm.lattice, nx / 2));
        const auto flow = constant_flow(tm.timegrid, model.initial_law);
        const auto kernel = build_kernel(model, flow, tm.lattice, tm.timegrid);
        const auto dp = solve_dp(model, flow, kernel);
        const auto lp = solve_lp(model, flow, kernel);
        CHECK(std::abs(lp.objective - dp.objective) <= 1e-8);
        CHECK(occupation_invariant_gap(lp.occupation, kernel, model.initial_law) <= 1e-9);
    }
}

TEST_CASE("LP occupation equals the DP policy occupation under unique argmax") {
    auto tm = oracles::random_instance(77, 4, 3, 3);
    const auto model = tm.build(oracles::node_dirac(tm.lattice, 2));
    const auto flow = constant_flow(tm.timegrid, model.initial_law);
    const auto kernel = build_kernel(model, flow, tm.lattice, tm.timegrid);
    const auto dp = solve_dp(model, flow, kernel);
    const auto lp = solve_lp(model, flow, kernel);
    const auto dp_occ = occupation_from_policy(kernel, dp.policy, model.initial_law);
    for (int t = 0; t < dp_occ.N; ++t) {
        double tv = 0.0;
        for (int x = 0; x < dp_occ.X; ++x)
            for (int a = 0; a < dp_occ.A; ++a)
                tv += std::abs(dp_occ.at(t, x, a) - lp.occupation.at(t, x, a));
        CHECK(0.5 * tv <= 1e-8);
    }
}

TEST_CASE("objective_eval: worked examples") {
    auto tm = oracles::random_instance(55, 4, 2, 4);
    std::fill(tm.b.begin(), tm.b.end(), 0.0);
    std::fill(tm.sigma.begin(), tm.sigma.end(), 0.0);
    const auto model = tm.build(oracles::node_dirac(tm.lattice, 1));
    const auto flow = constant_flow(tm.timegrid, model.initial_law);
    const auto kernel = build_kernel(model, flow, tm.lattice, tm.timegrid);

    StrictPolicy stay(tm.timegrid.N, tm.lattice.size());
    const auto occ = occupation_from_policy(kernel, stay, model.initial_law);

    SUBCASE("f = 0 leaves the terminal average") {
        auto zero_f = tm;
        std::fill(zero_f.f.begin(), zero_f.f.end(), 0.0);
        const auto m2 = zero_f.build(oracles::node_dirac(tm.lattice, 1));
        CHECK(objective_eval(m2, flow, tm.lattice, occ) ==
              doctest::Approx(tm.g[1]).epsilon(1e-12));
    }
    SUBCASE("f = 1, g = 0 integrates to the horizon T") {
        auto unit_f = tm;
        std::fill(unit_f.f.begin(), unit_f.f.end(), 1.0);
        std::fill(unit_f.g.begin(), unit_f.g.end(), 0.0);
        const auto m2 = unit_f.build(oracles::node_dirac(tm.lattice, 1));
        CHECK(objective_eval(m2, flow, tm.lattice, occ) ==
              doctest::Approx(tm.timegrid.T).epsilon(1e-12));
    }
    SUBCASE("optimal occupation reproduces the LP value") {
        const auto lp = solve_lp(model, flow, kernel);
        CHECK(objective_eval(model, flow, tm.lattice, lp.occupation) ==
              doctest::Approx(lp.objective).epsilon(1e-12));
    }
    SUBCASE("invariant violations throw") {
        OccupationMeasure bad = occ;
        bad.at(0, 1, 0) += 0.5;
        CHECK_THROWS(objective_eval(model, flow, tm.lattice, bad));
    }
}

TEST_CASE("exploitability: uniform policy on f = -a^2 loses 2/3") {
    // A = {-1, 0, 1}, b = sigma = 0, g = 0, T = 1: best value 0, uniform -2/3.
    mfg::StateLattice lattice = StateLattice::make_1d(0.0, 1.0, 0.5);
    TimeGrid grid(1.0, 4);
    oracles::TableModel tm(lattice, grid, {-1.0, 0.0, 1.0});
    for (int t = 0; t < grid.N; ++t)
        for (int x = 0; x < lattice.size(); ++x)
            for (int a = 0; a < 3; ++a) tm.f[tm.idx(t, x, a)] = -(tm.atoms[a] * tm.atoms[a]);
    const auto model = tm.build(oracles::node_dirac(lattice, 0));
    const auto flow = constant_flow(grid, model.initial_law);
    const auto kernel = build_kernel(model, flow, lattice, grid);

    RelaxedPolicy uniform(grid.N, lattice.size(), 3);
    for (auto& w : uniform.w) w = 1.0 / 3;
    const auto occ = occupation_from_policy(kernel, uniform, model.initial_law);
    CHECK(exploitability(model, flow, kernel, occ) == doctest::Approx(2.0 / 3).epsilon(1e-12));

    const auto lp = solve_lp(model, flow, kernel);
    CHECK(exploitability(model, flow, kernel, lp.occupation) <= 1e-8);
    CHECK(exploitability(model, flow, kernel, lp.occupation) >= -1e-8);
}

TEST_CASE("DP dominance over 50 random policies") {
    auto tm = oracles::random_instance(606, 5, 3, 4);
    const auto model = tm.build(oracles::node_dirac(tm.lattice, 2));
    const auto flow = constant_flow(tm.timegrid, model.initial_law);
    const auto kernel = build_kernel(model, flow, tm.lattice, tm.timegrid);
    const auto dp = solve_dp(model, flow, kernel);
    std::mt19937_64 rng(607);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        RelaxedPolicy q(tm.timegrid.N, tm.lattice.size(), 3);
        for (int t = 0; t < q.N; ++t)
            for (int x = 0; x < q.X; ++x) {
                double* w = q.row(t, x);
                double tot = 0.0;
                for (int a = 0; a < q.A; ++a) tot += (w[a] = 0.01 + uni(rng));
                for (int a = 0; a < q.A; ++a) w[a] /= tot;
            }
        const auto occ = occupation_from_policy(kernel, q, model.initial_law);
        CHECK(dp.objective >= objective_eval(model, flow, tm.lattice, occ) - 1e-10);
    }
}

TEST_CASE("occupation_from_policy: worked examples") {
    auto tm = oracles::random_instance(71, 3, 2, 3);
    std::fill(tm.b.begin(), tm.b.end(), 0.0);
    std::fill(tm.sigma.begin(), tm.sigma.end(), 0.0);
    const auto model = tm.build(oracles::node_dirac(tm.lattice, 0));
    const auto flow = constant_flow(tm.timegrid, model.initial_law);
    const auto kernel = build_kernel(model, flow, tm.lattice, tm.timegrid);

    StrictPolicy strict(tm.timegrid.N, tm.lattice.size());
    for (auto& a : strict.atom) a = 1;
    const auto occ = occupation_from_policy(kernel, strict, model.initial_law);
    for (int t = 0; t < occ.N; ++t) {
        CHECK(occ.at(t, 0, 1) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(occ.at(t, 0, 0) == 0.0);
        double total = 0.0;
        for (int x = 0; x < occ.X; ++x)
            for (int a = 0; a < occ.A; ++a) total += occ.at(t, x, a);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
    }

    RelaxedPolicy half(tm.timegrid.N, tm.lattice.size(), 2);
    for (auto& w : half.w) w = 0.5;
    const auto occ2 = occupation_from_policy(kernel, half, model.initial_law);
    CHECK(occ2.at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(occ2.at(0, 0, 1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(occupation_invariant_gap(occ2, kernel, model.initial_law) <= 1e-12);
}

TEST_CASE("LP concentrates near the analytic LQ feedback for a fixed flow") {
    // Small LQ instance against a frozen flow: per (t, x) with visited mass
    // the LP weight sits on atoms near -(x + c meanT)/(1 + T - t).
    const auto lattice = StateLattice::make_1d(-1.0, 2.0, 0.25);
    const TimeGrid grid(1.0, 16);
    const lq::LQSpec spec(1.0, 1.0, 0.2, 0.5, 0.1);
    const auto controls = ControlSpace::uniform_1d(-2.0, 2.0, 9, true);
    const MFGModel model = lq_model(spec, lattice, controls);
    const auto flow = constant_flow(grid, model.initial_law);
    const auto kernel = build_kernel(model, flow, lattice, grid);
    const auto lp = solve_lp(model, flow, kernel);
    const auto dp = solve_dp(model, flow, kernel);
    CHECK(std::abs(lp.objective - dp.objective) <= 1e-8);

    const double mean_T = flow.marginals.back().mean();
    const double spacing = 0.5;
    for (int t = 0; t < grid.N; ++t)
        for (int x = 0; x < lattice.size(); ++x) {
            const double* row = lp.occupation.row(t, x);
            double mass = 0.0, mean_a = 0.0;
            for (int a = 0; a < controls.count(); ++a) {
                mass += row[a];
                mean_a += row[a] * controls.scalar_atom(a);
            }
            if (mass < 1e-6) continue;
            mean_a /= mass;
            const double target = lq::analytic_feedback(grid.time(t), lattice.coord(0, x), spec, mean_T);
            const double clipped = std::clamp(target, -2.0, 2.0);
            CHECK(std::abs(mean_a - clipped) <= spacing);
        }
}
