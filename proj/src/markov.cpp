#include "mfg/markov.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "mfg/parallel.hpp"

namespace mfg {

RelaxedPolicy markov_project(const OccupationMeasure& occ) {
    RelaxedPolicy q(occ.N, occ.X, occ.A);
    for (int t = 0; t < occ.N; ++t)
        for (int x = 0; x < occ.X; ++x) {
            const double* r = occ.row(t, x);
            double total = 0.0;
            for (int a = 0; a < occ.A; ++a) total += r[a];
            double* out = q.row(t, x);
            if (total > 0.0) {
                for (int a = 0; a < occ.A; ++a) out[a] = r[a] / total;
            } else {
                out[0] = 1.0;
            }
        }
    return q;
}

// ---------------------------------------------------------------------------
// Mimicking verification

namespace {

struct Enumerator {
    const TransitionKernel& kernel;
    const HistoryPolicy& policy;
    std::uint64_t budget;
    std::uint64_t leaves = 0;

    // Original-law occupation and marginals.
    OccupationMeasure occ;
    std::vector<std::vector<double>> marginals;  // (N+1) x X

    Enumerator(const TransitionKernel& k, const HistoryPolicy& p, std::uint64_t b)
        : kernel(k), policy(p), budget(b), occ(k.steps(), k.nodes(), k.atoms()),
          marginals(k.steps() + 1, std::vector<double>(k.nodes(), 0.0)) {}

    void run(std::vector<int>& history, double prob) {
        const int t = static_cast<int>(history.size()) - 1;
        const int node = history.back();
        marginals[t][node] += prob;
        if (t == kernel.steps()) {
            if (++leaves > budget) throw std::length_error("path budget exceeded");
            return;
        }
        const std::vector<double> w = policy(t, history);
        if (static_cast<int>(w.size()) != kernel.atoms())
            throw std::invalid_argument("history policy returned wrong number of weights");
        const int S = kernel.stencil();
        for (int a = 0; a < kernel.atoms(); ++a) {
            if (w[a] <= 0.0) continue;
            occ.at(t, node, a) += prob * w[a];
            const std::int32_t* tg = kernel.row_targets(t, node, a);
            const double* pr = kernel.row_probs(t, node, a);
            for (int s = 0; s < S; ++s) {
                if (pr[s] <= 0.0) continue;
                history.push_back(tg[s]);
                run(history, prob * w[a] * pr[s]);
                history.pop_back();
            }
        }
    }
};

// Joint enumeration of the original (p1) and projected (p2) path laws over
// the union of their supports; accumulates the path-law TV.
struct JointEnumerator {
    const TransitionKernel& kernel;
    const HistoryPolicy& policy;
    const RelaxedPolicy& projected;
    std::uint64_t budget;
    std::uint64_t leaves = 0;
    double pathlaw_l1 = 0.0;

    void run(std::vector<int>& history, double p1, double p2) {
        const int t = static_cast<int>(history.size()) - 1;
        const int node = history.back();
        if (t == kernel.steps()) {
            pathlaw_l1 += std::abs(p1 - p2);
            if (++leaves > budget) throw std::length_error("path budget exceeded");
            return;
        }
        const std::vector<double> w1 = policy(t, history);
        const double* w2 = projected.row(t, node);
        const int S = kernel.stencil();
        for (int a = 0; a < kernel.atoms(); ++a) {
            const double q1 = p1 * std::max(0.0, w1[a]);
            const double q2 = p2 * w2[a];
            if (q1 <= 0.0 && q2 <= 0.0) continue;
            const std::int32_t* tg = kernel.row_targets(t, node, a);
            const double* pr = kernel.row_probs(t, node, a);
            for (int s = 0; s < S; ++s) {
                if (pr[s] <= 0.0) continue;
                history.push_back(tg[s]);
                run(history, q1 * pr[s], q2 * pr[s]);
                history.pop_back();
            }
        }
    }
};

double tv(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

}  // namespace

MimickingReport mimicking_report(const TransitionKernel& kernel, const HistoryPolicy& policy,
                                 const DiscreteMeasure& initial, const MimickingOptions& opts) {
    const auto initial_dense = detail::measure_to_dense(kernel.lattice(), initial);
    const int X = kernel.nodes();
    MimickingReport report;

    try {
        Enumerator original(kernel, policy, opts.path_budget);
        std::vector<int> history;
        history.reserve(kernel.steps() + 1);
        for (int x = 0; x < X; ++x) {
            if (initial_dense[x] <= 0.0) continue;
            history.assign(1, x);
            original.run(history, initial_dense[x]);
        }
        const RelaxedPolicy projected = markov_project(original.occ);
        const auto proj_marginals = detail::rollout_dense(kernel, projected, initial_dense);
        for (int t = 0; t <= kernel.steps(); ++t)
            report.marginal_tv = std::max(report.marginal_tv, tv(original.marginals[t], proj_marginals[t]));

        JointEnumerator joint{kernel, policy, projected, opts.path_budget};
        for (int x = 0; x < X; ++x) {
            if (initial_dense[x] <= 0.0) continue;
            history.assign(1, x);
            joint.run(history, initial_dense[x], initial_dense[x]);
        }
        report.pathlaw_tv = 0.5 * joint.pathlaw_l1;
        report.paths = joint.leaves;
        report.exact = true;
        return report;
    } catch (const std::length_error&) {
        if (!opts.mc_fallback)
            throw std::runtime_error(
                "verify_mimicking: path enumeration budget exceeded and Monte Carlo fallback not enabled");
    }

    // Monte Carlo fallback: empirical occupation and marginals of the
    // original policy, exact rollout of the estimated projection.
    const int N = kernel.steps(), A = kernel.atoms(), S = kernel.stencil();
    OccupationMeasure occ(N, X, A);
    std::vector<std::vector<double>> emp(N + 1, std::vector<double>(X, 0.0));
    std::vector<double> init_cdf(initial_dense.begin(), initial_dense.end());
    for (int x = 1; x < X; ++x) init_cdf[x] += init_cdf[x - 1];

    for (int p = 0; p < opts.mc_paths; ++p) {
        std::mt19937_64 rng(splitmix64(opts.seed ^ (0x9e3779b97f4a7c15ULL * (p + 1))));
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::vector<int> history;
        double u = uni(rng) * init_cdf.back();
        int node = static_cast<int>(std::lower_bound(init_cdf.begin(), init_cdf.end(), u) - init_cdf.begin());
        node = std::min(node, X - 1);
        history.push_back(node);
        emp[0][node] += 1.0;
        for (int t = 0; t < N; ++t) {
            const std::vector<double> w = policy(t, history);
            double ua = uni(rng);
            int a = 0;
            for (; a + 1 < A; ++a) {
                ua -= std::max(0.0, w[a]);
                if (ua <= 0.0) break;
            }
            occ.at(t, node, a) += 1.0;
            const std::int32_t* tg = kernel.row_targets(t, node, a);
            const double* pr = kernel.row_probs(t, node, a);
            double us = uni(rng);
            int s = 0;
            for (; s + 1 < S; ++s) {
                us -= pr[s];
                if (us <= 0.0) break;
            }
            node = tg[s];
            history.push_back(node);
            emp[t + 1][node] += 1.0;
        }
    }
    for (auto& row : emp)
        for (double& v : row) v /= opts.mc_paths;
    for (double& v : occ.m) v /= opts.mc_paths;
    occ.terminal = emp[N];

    const RelaxedPolicy projected = markov_project(occ);
    const auto proj_marginals = detail::rollout_dense(kernel, projected, initial_dense);
    for (int t = 0; t <= N; ++t)
        report.marginal_tv = std::max(report.marginal_tv, tv(emp[t], proj_marginals[t]));
    report.pathlaw_tv = std::numeric_limits<double>::quiet_NaN();  // not estimated in MC mode
    report.paths = opts.mc_paths;
    report.exact = false;
    return report;
}

double verify_mimicking(const TransitionKernel& kernel, const HistoryPolicy& policy,
                        const DiscreteMeasure& initial, const MimickingOptions& opts) {
    return mimicking_report(kernel, policy, initial, opts).marginal_tv;
}

// ---------------------------------------------------------------------------
// Strict selection

std::pair<StrictPolicy, GapReport> strictify(const MFGModel& model, const MeasureFlow& muflow,
                                             const TransitionKernel& kernel,
                                             const RelaxedPolicy& qhat,
                                             const StrictifyOptions& opts) {
    const int N = kernel.steps(), X = kernel.nodes(), A = kernel.atoms();
    const int d = model.dim;
    if (qhat.N != N || qhat.X != X || qhat.A != A)
        throw std::invalid_argument("strictify: policy does not match the kernel grids");

    // Atom spacing and f-Lipschitz scale in control space, for the default
    // f tolerance at non-representable barycenters.
    double atom_spacing = 0.0;
    {
        const int da = model.controls.dimension();
        for (int i = 0; i < A; ++i) {
            double nn = std::numeric_limits<double>::infinity();
            for (int j = 0; j < A; ++j) {
                if (j == i) continue;
                double s = 0.0;
                for (int k = 0; k < da; ++k) {
                    const double dk = model.controls.atom(i)[k] - model.controls.atom(j)[k];
                    s += dk * dk;
                }
                nn = std::min(nn, std::sqrt(s));
            }
            if (std::isfinite(nn)) atom_spacing = std::max(atom_spacing, nn);
        }
    }

    const auto initial_dense = detail::measure_to_dense(kernel.lattice(), model.initial_law);
    const auto relaxed_marginals = detail::rollout_dense(kernel, qhat, initial_dense);
    const auto tables = detail::compute_reward_tables(model, muflow, kernel);

    StrictPolicy strict(N, X);
    GapReport report;
    report.min_f_surplus = std::numeric_limits<double>::infinity();

    std::vector<double> bvals(static_cast<std::size_t>(A) * d);
    std::vector<double> svals(static_cast<std::size_t>(A) * d * d);
    std::vector<double> fvals(A);
    double x[2];

    for (int t = 0; t < N; ++t) {
        const double tv_ = kernel.timegrid().time(t);
        const DiscreteMeasure& mu = muflow.marginals[t];
        for (int node = 0; node < X; ++node) {
            kernel.lattice().point(node, x);
            const double* q = qhat.row(t, node);
            for (int a = 0; a < A; ++a) {
                model.drift(tv_, x, mu, model.controls.atom(a), bvals.data() + a * d);
                model.diffusion_matrix(tv_, x, mu, model.controls.atom(a), svals.data() + a * d * d);
                fvals[a] = model.running_reward(tv_, x, mu, model.controls.atom(a));
            }
            double B[2] = {0, 0}, S[4] = {0, 0, 0, 0}, F = 0.0;
            for (int a = 0; a < A; ++a) {
                if (q[a] == 0.0) continue;
                for (int k = 0; k < d; ++k) B[k] += q[a] * bvals[a * d + k];
                for (int k = 0; k < d * d; ++k) S[k] += q[a] * svals[a * d * d + k];
                F += q[a] * fvals[a];
            }
            auto mismatch = [&](int a) {
                double db = 0.0, ds = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double e = bvals[a * d + k] - B[k];
                    db += e * e;
                }
                for (int k = 0; k < d * d; ++k) {
                    const double e = svals[a * d * d + k] - S[k];
                    ds += e * e;
                }
                return std::sqrt(db) + std::sqrt(ds);
            };

            int best_any = 0;
            double best_any_mis = std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                const double mis = mismatch(a);
                if (mis < best_any_mis) { best_any_mis = mis; best_any = a; }
            }
            double tol_f;
            if (opts.tol_f) {
                tol_f = *opts.tol_f;
            } else if (best_any_mis <= 1e-9 * (1.0 + std::abs(F))) {
                tol_f = 1e-9 * (1.0 + std::abs(F));
            } else {
                double lip = 0.0;
                for (int a = 0; a + 1 < A; ++a)
                    lip = std::max(lip, std::abs(fvals[a + 1] - fvals[a]) /
                                            std::max(1e-300, atom_spacing));
                tol_f = lip * atom_spacing + 1e-9;
            }

            int chosen = -1;
            double chosen_mis = std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                if (fvals[a] < F - tol_f) continue;
                const double mis = mismatch(a);
                if (mis < chosen_mis) { chosen_mis = mis; chosen = a; }
            }
            bool ok = chosen >= 0;
            if (!ok) { chosen = best_any; chosen_mis = best_any_mis; }
            strict.at(t, node) = chosen;

            if (relaxed_marginals[t][node] > opts.visited_mass) {
                if (!ok) report.constraint_ok = false;
                double db = 0.0, ds = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double e = bvals[chosen * d + k] - B[k];
                    db += e * e;
                }
                for (int k = 0; k < d * d; ++k) {
                    const double e = svals[chosen * d * d + k] - S[k];
                    ds += e * e;
                }
                report.max_drift_mismatch = std::max(report.max_drift_mismatch, std::sqrt(db));
                report.max_diffusion_mismatch = std::max(report.max_diffusion_mismatch, std::sqrt(ds));
                report.min_f_surplus = std::min(report.min_f_surplus, fvals[chosen] - F);
            }
        }
    }
    if (!std::isfinite(report.min_f_surplus)) report.min_f_surplus = 0.0;

    // Exact value-loss bound by policy evaluation: loss = J(qhat) - J(strict)
    // = -sum_t sum_x mu^strict_t(x) A_t(x) with A the advantage of the
    // strict action under the value function of qhat.
    const int S_ = kernel.stencil();
    std::vector<double> vq(static_cast<std::size_t>(N + 1) * X);
    for (int xnode = 0; xnode < X; ++xnode) vq[static_cast<std::size_t>(N) * X + xnode] = tables.terminal[xnode];
    for (int t = N - 1; t >= 0; --t) {
        const double* vnext = vq.data() + static_cast<std::size_t>(t + 1) * X;
        double* vcur = vq.data() + static_cast<std::size_t>(t) * X;
        for (int xnode = 0; xnode < X; ++xnode) {
            const double* q = qhat.row(t, xnode);
            const double* frow = tables.running.data() + (static_cast<std::size_t>(t) * X + xnode) * A;
            double v = 0.0;
            for (int a = 0; a < A; ++a) {
                if (q[a] == 0.0) continue;
                double qa = frow[a];
                const std::int32_t* tg = kernel.row_targets(t, xnode, a);
                const double* pr = kernel.row_probs(t, xnode, a);
                for (int s = 0; s < S_; ++s) qa += pr[s] * vnext[tg[s]];
                v += q[a] * qa;
            }
            vcur[xnode] = v;
        }
    }
    const auto strict_marginals =
        detail::rollout_dense(kernel, strict.as_relaxed(A), initial_dense);
    double advantage_sum = 0.0;
    double value_scale = 0.0;
    for (int t = 0; t < N; ++t) {
        const double* vnext = vq.data() + static_cast<std::size_t>(t + 1) * X;
        const double* vcur = vq.data() + static_cast<std::size_t>(t) * X;
        for (int xnode = 0; xnode < X; ++xnode) {
            const double mx = strict_marginals[t][xnode];
            if (mx == 0.0) continue;
            const int a = strict.at(t, xnode);
            double qa = tables.running[(static_cast<std::size_t>(t) * X + xnode) * A + a];
            const std::int32_t* tg = kernel.row_targets(t, xnode, a);
            const double* pr = kernel.row_probs(t, xnode, a);
            for (int s = 0; s < S_; ++s) qa += pr[s] * vnext[tg[s]];
            advantage_sum += mx * (qa - vcur[xnode]);
            value_scale = std::max(value_scale, std::abs(vcur[xnode]));
        }
    }
    report.value_loss_bound = std::max(0.0, -advantage_sum) + std::max(1e-10, 1e-12 * value_scale);
    const double c1 = model.constants.c1;
    const double T = kernel.timegrid().T;
    report.flow_gap_bound = (report.max_drift_mismatch * T +
                             std::sqrt(std::max(0.0, report.max_diffusion_mismatch) * T)) *
                            std::exp(c1 * T);
    return {std::move(strict), report};
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

PathBundle simulate_impl(const MFGModel& model, const MeasureFlow& muflow,
                         const StateLattice& lattice, const TimeGrid& timegrid,
                         const RelaxedPolicy& policy, int n_paths, std::uint64_t seed,
                         int threads) {
    if (n_paths < 1) throw std::invalid_argument("simulate: n_paths must be >= 1");
    if (policy.X != lattice.size() || policy.N != timegrid.N)
        throw std::invalid_argument("simulate: policy does not match the grids");
    if (static_cast<int>(muflow.marginals.size()) != timegrid.N + 1)
        throw std::invalid_argument("simulate: flow does not match the time grid");

    const int N = timegrid.N, d = model.dim, m = model.noise_dim, A = policy.A;
    const double dt = timegrid.dt();
    const double sqdt = std::sqrt(dt);

    PathBundle bundle;
    bundle.n_paths = n_paths;
    bundle.steps = N;
    bundle.dim = d;
    bundle.seed = seed;
    bundle.states.assign(static_cast<std::size_t>(n_paths) * (N + 1) * d, 0.0);

    // Initial-law CDF for inverse sampling.
    const DiscreteMeasure& lambda = model.initial_law;
    std::vector<double> cdf(lambda.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) cdf[i] = (acc += lambda.mass(i));

    parallel_for(n_paths, threads, [&](std::int64_t lo, std::int64_t hi) {
        double x[2], b[2], sig[4], z[2];
        for (std::int64_t p = lo; p < hi; ++p) {
            std::mt19937_64 rng(splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * (p + 1))));
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            std::normal_distribution<double> gauss(0.0, 1.0);

            const double u0 = uni(rng) * acc;
            std::size_t i0 = std::lower_bound(cdf.begin(), cdf.end(), u0) - cdf.begin();
            if (i0 >= lambda.size()) i0 = lambda.size() - 1;
            for (int k = 0; k < d; ++k) x[k] = lambda.point(i0)[k];

            double* out = bundle.states.data() + static_cast<std::size_t>(p) * (N + 1) * d;
            for (int k = 0; k < d; ++k) out[k] = x[k];
            for (int t = 0; t < N; ++t) {
                const int node = lattice.nearest(x);
                const double* w = policy.row(t, node);
                double ua = uni(rng);
                int a = A - 1;
                for (int c = 0; c < A; ++c) {
                    ua -= w[c];
                    if (ua <= 0.0) { a = c; break; }
                }
                const DiscreteMeasure& mu = muflow.marginals[t];
                const double tv = timegrid.time(t);
                model.drift(tv, x, mu, model.controls.atom(a), b);
                model.volatility(tv, x, mu, model.controls.atom(a), sig);
                for (int k = 0; k < m; ++k) z[k] = gauss(rng);
                for (int k = 0; k < d; ++k) {
                    double diff = 0.0;
                    for (int j = 0; j < m; ++j) diff += sig[k * m + j] * z[j];
                    x[k] += b[k] * dt + diff * sqdt;
                }
                for (int k = 0; k < d; ++k) out[(t + 1) * d + k] = x[k];
            }
        }
    });
    return bundle;
}

}  // namespace

PathBundle simulate(const MFGModel& model, const MeasureFlow& muflow, const StateLattice& lattice,
                    const TimeGrid& timegrid, const RelaxedPolicy& policy, int n_paths,
                    std::uint64_t seed, int threads) {
    return simulate_impl(model, muflow, lattice, timegrid, policy, n_paths, seed, threads);
}

PathBundle simulate(const MFGModel& model, const MeasureFlow& muflow, const StateLattice& lattice,
                    const TimeGrid& timegrid, const StrictPolicy& policy, int n_paths,
                    std::uint64_t seed, int threads) {
    return simulate_impl(model, muflow, lattice, timegrid,
                         policy.as_relaxed(model.controls.count()), n_paths, seed, threads);
}

std::vector<std::vector<double>> binned_marginals(const PathBundle& bundle,
                                                  const StateLattice& lattice) {
    std::vector<std::vector<double>> out(bundle.steps + 1,
                                         std::vector<double>(lattice.size(), 0.0));
    double x[2];
    for (int p = 0; p < bundle.n_paths; ++p)
        for (int t = 0; t <= bundle.steps; ++t) {
            for (int k = 0; k < bundle.dim; ++k) x[k] = bundle.state(p, t, k);
            out[t][lattice.nearest(x)] += 1.0;
        }
    for (auto& row : out)
        for (double& v : row) v /= bundle.n_paths;
    return out;
}

void save_paths(const std::filesystem::path& file, const PathBundle& bundle) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write path file: " + file.string());
    os << "# seed " << bundle.seed << '\n';
    os << "path,time_index";
    for (int k = 0; k < bundle.dim; ++k) os << ",x" << k;
    os << '\n';
    char buf[40];
    for (int p = 0; p < bundle.n_paths; ++p)
        for (int t = 0; t <= bundle.steps; ++t) {
            os << p << ',' << t;
            for (int k = 0; k < bundle.dim; ++k) {
                std::snprintf(buf, sizeof(buf), "%.17g", bundle.state(p, t, k));
                os << ',' << buf;
            }
            os << '\n';
        }
}

}  // namespace mfg
