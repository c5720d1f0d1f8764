#include "mfg/fixedpoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfg {

void SolveConfig::validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("SolveConfig: tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("SolveConfig: max_iter must be >= 1");
    if (damping == Damping::Constant && !(omega > 0.0 && omega <= 1.0))
        throw std::invalid_argument("SolveConfig: constant damping needs omega in (0,1]");
    if (!(p >= 1.0)) throw std::invalid_argument("SolveConfig: residual order p must be >= 1");
    if (threads < 1) throw std::invalid_argument("SolveConfig: threads must be >= 1");
}

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "CONVERGED";
        case SolveStatus::BudgetExhausted: return "BUDGET_EXHAUSTED";
        case SolveStatus::Oscillating: return "OSCILLATING";
    }
    return "UNKNOWN";
}

bool detect_oscillation(std::span<const double> residuals, double tol) {
    const std::size_t n = residuals.size();
    if (n < 40) return false;
    double best_last = std::numeric_limits<double>::infinity();
    double best_prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = n - 20; i < n; ++i) best_last = std::min(best_last, residuals[i]);
    for (std::size_t i = n - 40; i < n - 20; ++i) best_prev = std::min(best_prev, residuals[i]);
    return best_last > 0.9 * best_prev && best_last > tol;
}

namespace detail {

MeasureFlow flow_from_dense(const StateLattice& lattice, const TimeGrid& timegrid,
                            const std::vector<std::vector<double>>& dense) {
    std::vector<DiscreteMeasure> marginals;
    marginals.reserve(dense.size());
    for (const auto& row : dense) marginals.push_back(dense_to_measure(lattice, row));
    return MeasureFlow(timegrid.times(), std::move(marginals));
}

}  // namespace detail

namespace {

using Dense = std::vector<std::vector<double>>;

double dense_mean(const StateLattice& lattice, std::span<const double> mass) {
    double s = 0.0;
    for (int i = 0; i < lattice.size(); ++i) s += mass[i] * lattice.coord(0, lattice.index0(i));
    return s;
}

double dense_flow_residual(const StateLattice& lattice, const Dense& a, const Dense& b, double p) {
    double worst = 0.0;
    if (lattice.dimension() == 1) {
        for (std::size_t t = 0; t < a.size(); ++t) {
            const double pp = detail::wasserstein_pp_grid_1d(a[t], b[t], lattice, p);
            worst = std::max(worst, std::pow(std::max(0.0, pp), 1.0 / p));
        }
    } else {
        for (std::size_t t = 0; t < a.size(); ++t) {
            const auto ma = detail::dense_to_measure(lattice, a[t]);
            const auto mb = detail::dense_to_measure(lattice, b[t]);
            worst = std::max(worst, wasserstein(ma, mb, p));
        }
    }
    return worst;
}

Dense rollout_strict(const TransitionKernel& kernel, const StrictPolicy& policy,
                     std::span<const double> initial) {
    const int N = kernel.steps(), X = kernel.nodes(), S = kernel.stencil();
    Dense marg(N + 1, std::vector<double>(X, 0.0));
    std::copy(initial.begin(), initial.end(), marg[0].begin());
    for (int t = 0; t < N; ++t) {
        const auto& cur = marg[t];
        auto& nxt = marg[t + 1];
        for (int x = 0; x < X; ++x) {
            const double mx = cur[x];
            if (mx == 0.0) continue;
            const int a = policy.at(t, x);
            const std::int32_t* tg = kernel.row_targets(t, x, a);
            const double* pr = kernel.row_probs(t, x, a);
            for (int s = 0; s < S; ++s) nxt[tg[s]] += mx * pr[s];
        }
    }
    return marg;
}

// Running average of best-response occupations. Fictitious play keeps plain
// sums (the uniform average), constant damping keeps exponentially weighted
// averages matching the flow mixture.
struct OccupationAverage {
    bool fp = true;
    int N = 0, X = 0, A = 0;
    std::vector<double> occ;  // sums (fp) or averages (constant)
    std::vector<double> rho;
    double run = 0.0;
    double weight = 0.0;  // total weight accumulated (fp: count)

    OccupationAverage(bool fp_, int n, int x, int a)
        : fp(fp_), N(n), X(x), A(a), occ(static_cast<std::size_t>(n) * x * a, 0.0), rho(x, 0.0) {}

    void scale(double keep) {
        if (keep == 1.0) return;
        for (double& v : occ) v *= keep;
        for (double& v : rho) v *= keep;
        run *= keep;
        weight *= keep;
    }

    void add_strict(double w, const StrictPolicy& policy, const Dense& marg,
                    std::span<const double> running_table) {
        for (int t = 0; t < N; ++t)
            for (int x = 0; x < X; ++x) {
                const double mx = marg[t][x];
                if (mx == 0.0) continue;
                const int a = policy.at(t, x);
                const std::size_t idx = (static_cast<std::size_t>(t) * X + x) * A + a;
                occ[idx] += w * mx;
                run += w * mx * running_table[idx];
            }
        for (int x = 0; x < X; ++x) rho[x] += w * marg[N][x];
        weight += w;
    }

    void add_dense(double w, const OccupationMeasure& o, std::span<const double> running_table) {
        for (std::size_t i = 0; i < occ.size(); ++i) {
            occ[i] += w * o.m[i];
            run += w * o.m[i] * running_table[i];
        }
        for (int x = 0; x < X; ++x) rho[x] += w * o.terminal[x];
        weight += w;
    }

    OccupationMeasure materialize() const {
        OccupationMeasure out(N, X, A);
        const double inv = weight > 0.0 ? 1.0 / weight : 0.0;
        for (std::size_t i = 0; i < occ.size(); ++i) out.m[i] = occ[i] * inv;
        for (int x = 0; x < X; ++x) out.terminal[x] = rho[x] * inv;
        return out;
    }

    double mean_running() const { return weight > 0.0 ? run / weight : 0.0; }
    std::vector<double> mean_terminal() const {
        std::vector<double> out(rho);
        const double inv = weight > 0.0 ? 1.0 / weight : 0.0;
        for (double& v : out) v *= inv;
        return out;
    }
};

}  // namespace

BestResponse best_response(const MFGModel& model, const MeasureFlow& muflow,
                           const TransitionKernel& kernel, SolveConfig::Method method,
                           int threads) {
    const auto initial = detail::measure_to_dense(kernel.lattice(), model.initial_law);
    if (method == SolveConfig::Method::Lp) {
        LpSolution lp = solve_lp(model, muflow, kernel);
        Dense marg(kernel.steps() + 1);
        for (int t = 0; t < kernel.steps(); ++t) marg[t] = lp.occupation.state_marginal(t);
        marg[kernel.steps()] = lp.occupation.terminal;
        return BestResponse{detail::flow_from_dense(kernel.lattice(), kernel.timegrid(), marg),
                            std::move(lp.occupation), lp.objective};
    }
    DpSolution dp = solve_dp(model, muflow, kernel, threads);
    OccupationMeasure occ = occupation_from_policy(kernel, dp.policy, model.initial_law);
    Dense marg(kernel.steps() + 1);
    for (int t = 0; t < kernel.steps(); ++t) marg[t] = occ.state_marginal(t);
    marg[kernel.steps()] = occ.terminal;
    return BestResponse{detail::flow_from_dense(kernel.lattice(), kernel.timegrid(), marg),
                        std::move(occ), dp.objective};
}

SolveReport iterate(const MFGModel& model, const StateLattice& lattice, const TimeGrid& timegrid,
                    const SolveConfig& config) {
    config.validate();
    if (model.dim != lattice.dimension())
        throw std::invalid_argument("iterate: model/lattice dimension mismatch");

    const int N = timegrid.N, X = lattice.size(), A = model.controls.count();
    const bool fp = config.damping == SolveConfig::Damping::FictitiousPlay;
    const bool dyn_free = model.dynamics_mu_free();
    const bool fast_candidate = dyn_free && model.running_reward_mu_free;

    const auto initial = detail::measure_to_dense(lattice, model.initial_law);

    // Constant flow at the initial law; used to build the kernel when the
    // dynamics ignore mu, and as the kernel input for the initialization.
    MeasureFlow lambda_flow = [&] {
        std::vector<DiscreteMeasure> ms(static_cast<std::size_t>(N) + 1, model.initial_law);
        return MeasureFlow(timegrid.times(), std::move(ms));
    }();

    std::optional<TransitionKernel> kernel;
    auto kernel_for = [&](const Dense& dense) -> const TransitionKernel& {
        if (dyn_free) {
            if (!kernel) kernel.emplace(build_kernel(model, lambda_flow, lattice, timegrid, config.threads));
            return *kernel;
        }
        kernel.emplace(build_kernel(model, detail::flow_from_dense(lattice, timegrid, dense),
                                    lattice, timegrid, config.threads));
        return *kernel;
    };

    // Convexity gate for strict selection, checked once at solver start at
    // the initial law.
    SolveReport report;
    if (model.controls.convex_hint()) {
        double x0[2] = {0.0, 0.0};
        const int node = lattice.nearest(std::array<double, 2>{model.initial_law.mean(0),
                                                               model.dim == 2 ? model.initial_law.mean(1) : 0.0}
                                             .data());
        lattice.point(node, x0);
        ConvexityOptions copts;
        copts.seed = config.seed + 1;
        report.convexity = check_convexity(model, 0.0, x0, model.initial_law, copts);
        report.strictify_gate = report.convexity->status == ConvexityStatus::Pass;
    }

    // Initialization: the zero/first-atom control applied constantly, with
    // the kernel built against the constant initial-law flow.
    Dense mu;
    {
        if (!kernel)
            kernel.emplace(build_kernel(model, lambda_flow, lattice, timegrid, config.threads));
        StrictPolicy init_policy(N, X);
        std::fill(init_policy.atom.begin(), init_policy.atom.end(),
                  static_cast<std::int32_t>(model.controls.default_atom()));
        mu = rollout_strict(*kernel, init_policy, initial);
    }

    // Running rewards (dt-scaled) are cached when f ignores mu; the
    // terminal vector is refreshed from the current flow when g depends on
    // it. mu-dependent f recomputes the full table per iteration (small
    // models only).
    std::vector<double> running_table, terminal_table(X);
    bool running_cached = false;
    auto refresh_tables = [&](const Dense& dense, const TransitionKernel& k) {
        if (!model.running_reward_mu_free) {
            detail::RewardTables t = detail::compute_reward_tables(
                model, detail::flow_from_dense(lattice, timegrid, dense), k);
            running_table = std::move(t.running);
            terminal_table = std::move(t.terminal);
            return;
        }
        if (!running_cached) {
            detail::RewardTables t = detail::compute_reward_tables(model, lambda_flow, k);
            running_table = std::move(t.running);
            running_cached = true;
            if (model.terminal_reward_mu_free) {
                terminal_table = std::move(t.terminal);
                return;
            }
        }
        if (!model.terminal_reward_mu_free) {
            const DiscreteMeasure muT = detail::dense_to_measure(lattice, dense[N]);
            double x[2];
            for (int node = 0; node < X; ++node) {
                lattice.point(node, x);
                terminal_table[node] = model.terminal_reward(x, muT);
            }
        }
    };

    OccupationAverage average(fp, N, X, A);
    if (!fp) {
        // Constant damping retains the initialization flow with weight
        // (1-omega)^k; seed the candidate average with the same policy.
        const TransitionKernel& k0 = kernel_for(mu);
        refresh_tables(mu, k0);
        StrictPolicy init_policy(N, X);
        std::fill(init_policy.atom.begin(), init_policy.atom.end(),
                  static_cast<std::int32_t>(model.controls.default_atom()));
        const Dense init_marg = rollout_strict(k0, init_policy, initial);
        average.add_strict(1.0, init_policy, init_marg, running_table);
    }

    std::vector<double> residuals;
    residuals.reserve(config.max_iter);
    bool converged = false, oscillating = false;

    for (int k = 0; k < config.max_iter; ++k) {
        const TransitionKernel& ker = kernel_for(mu);
        refresh_tables(mu, ker);
        const double omega_k = fp ? 1.0 / (k + 1) : config.omega;

        // Best response against the current flow.
        double value;
        Dense br_marg;
        StrictPolicy br_policy;
        OccupationMeasure br_occ;  // only filled on the LP route
        if (config.method == SolveConfig::Method::Dp) {
            DpSolution dp =
                detail::dp_backward(ker, running_table, terminal_table, initial, config.threads);
            value = dp.objective;
            br_marg = rollout_strict(ker, dp.policy, initial);
            br_policy = std::move(dp.policy);
        } else {
            const MeasureFlow muflow = detail::flow_from_dense(lattice, timegrid, mu);
            LpSolution lp = solve_lp(model, muflow, ker);
            value = lp.objective;
            br_marg.resize(N + 1);
            for (int t = 0; t < N; ++t) br_marg[t] = lp.occupation.state_marginal(t);
            br_marg[N] = lp.occupation.terminal;
            br_occ = std::move(lp.occupation);
        }

        const double residual = dense_flow_residual(lattice, mu, br_marg, config.p);
        if (!std::isfinite(residual)) throw std::runtime_error("iterate: non-finite flow residual");
        residuals.push_back(residual);

        // Candidate (averaged) occupation, current response included.
        average.scale(fp ? 1.0 : 1.0 - omega_k);
        const double add_w = fp ? 1.0 : omega_k;
        if (config.method == SolveConfig::Method::Dp)
            average.add_strict(add_w, br_policy, br_marg, running_table);
        else
            average.add_dense(add_w, br_occ, running_table);

        double cand_value;
        if (fast_candidate) {
            cand_value = average.mean_running();
            const auto rho = average.mean_terminal();
            for (int x = 0; x < X; ++x) cand_value += rho[x] * terminal_table[x];
        } else {
            const RelaxedPolicy cand = markov_project(average.materialize());
            const Dense cand_marg = detail::rollout_dense(ker, cand, initial);
            cand_value = 0.0;
            for (int t = 0; t < N; ++t)
                for (int x = 0; x < X; ++x) {
                    const double mx = cand_marg[t][x];
                    if (mx == 0.0) continue;
                    const double* w = cand.row(t, x);
                    const double* frow = running_table.data() + (static_cast<std::size_t>(t) * X + x) * A;
                    for (int a = 0; a < A; ++a) cand_value += mx * w[a] * frow[a];
                }
            for (int x = 0; x < X; ++x) cand_value += cand_marg[N][x] * terminal_table[x];
        }
        const double expl = value - cand_value;

        report.iterates.push_back(IterateRecord{residual, expl, value, dense_mean(lattice, mu[N])});

        if (residual <= config.tol && expl <= config.tol_J(value)) {
            converged = true;
            break;
        }
        if (!fp && detect_oscillation(residuals, config.tol)) {
            oscillating = true;
            break;
        }

        for (int t = 0; t <= N; ++t)
            for (int x = 0; x < X; ++x)
                mu[t][x] = (1.0 - omega_k) * mu[t][x] + omega_k * br_marg[t][x];
    }

    report.status = converged ? SolveStatus::Converged
                              : (oscillating ? SolveStatus::Oscillating : SolveStatus::BudgetExhausted);
    report.final_flow = detail::flow_from_dense(lattice, timegrid, mu);
    report.final_policy = markov_project(average.materialize());
    const IterateRecord& last = report.iterates.back();
    report.final_value = last.value;
    report.final_exploitability = last.exploitability;
    report.final_residual = last.flow_residual;
    report.tol_J = config.tol_J(last.value);

    for (int t = 0; t <= N; ++t) {
        double bm = 0.0;
        for (int x = 0; x < X; ++x)
            if (lattice.is_boundary(x)) bm += mu[t][x];
        report.boundary_mass = std::max(report.boundary_mass, bm);
    }

    // Post-hoc certificate: an independent re-solve of the best response at
    // the final flow must reproduce the residual.
    {
        const TransitionKernel& ker = kernel_for(mu);
        const BestResponse re = best_response(model, report.final_flow, ker, config.method, config.threads);
        Dense re_marg(N + 1);
        for (int t = 0; t < N; ++t) re_marg[t] = re.occupation.state_marginal(t);
        re_marg[N] = re.occupation.terminal;
        report.reentry_residual = dense_flow_residual(lattice, mu, re_marg, config.p);
        report.reentry_ok = !converged || report.reentry_residual <= config.tol;
    }

    if (converged && report.strictify_gate && config.strictify_on_convergence) {
        const TransitionKernel& ker = kernel_for(mu);
        auto [strict, gap] = strictify(model, report.final_flow, ker, report.final_policy);
        const Dense strict_marg = rollout_strict(ker, strict, initial);
        report.strict_flow_distance =
            dense_flow_residual(lattice, mu, strict_marg, config.p);
        report.strict_policy = std::move(strict);
        report.strict_gap = gap;
    }
    return report;
}

std::vector<LadderLevel> truncation_ladder(const MFGModel& model, const StateLattice& lattice,
                                           const TimeGrid& timegrid, const SolveConfig& config,
                                           std::span<const int> levels) {
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (levels[i] <= levels[i - 1])
            throw std::invalid_argument("truncation_ladder: levels must be increasing");

    std::vector<LadderLevel> out;
    for (int n : levels) {
        LadderLevel level;
        level.n = n;
        level.radius = std::sqrt(n / (2.0 * model.constants.c1));
        try {
            MFGModel truncated = model;
            truncated.controls = truncate_controls(model.controls, n, model.constants.c1);
            level.atoms = truncated.controls.count();
            SolveReport rep = iterate(truncated, lattice, timegrid, config);
            level.value = rep.final_value;
            level.mean_T = rep.final_flow.marginals.back().mean();
            double worst = 0.0;
            for (const auto& m : rep.final_flow.marginals)
                worst = std::max(worst, moment(m, model.constants.p_prime));
            level.moment_pprime = worst;
            level.report = std::move(rep);
        } catch (const std::exception& e) {
            level.error = e.what();
        }
        out.push_back(std::move(level));
    }
    return out;
}

}  // namespace mfg
