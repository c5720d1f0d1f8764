#include "mfg/control.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mfg/parallel.hpp"

namespace mfg {

namespace detail {

RewardTables compute_reward_tables(const MFGModel& model, const MeasureFlow& muflow,
                                   const TransitionKernel& kernel) {
    const int N = kernel.steps(), X = kernel.nodes(), A = kernel.atoms();
    const double dt = kernel.dt();
    RewardTables tables;
    tables.running.resize(static_cast<std::size_t>(N) * X * A);
    tables.terminal.resize(X);
    double x[2];
    for (int t = 0; t < N; ++t) {
        const double tv = kernel.timegrid().time(t);
        const DiscreteMeasure& mu = muflow.marginals[t];
        for (int node = 0; node < X; ++node) {
            kernel.lattice().point(node, x);
            double* slot = tables.running.data() + (static_cast<std::size_t>(t) * X + node) * A;
            for (int a = 0; a < A; ++a) {
                const double f = model.running_reward(tv, x, mu, model.controls.atom(a));
                if (!std::isfinite(f)) {
                    std::ostringstream ss;
                    ss << "non-finite running reward at (t=" << tv << ", node=" << node
                       << ", atom=" << a << ")";
                    throw std::runtime_error(ss.str());
                }
                slot[a] = f * dt;
            }
        }
    }
    const DiscreteMeasure& muT = muflow.marginals[N];
    for (int node = 0; node < X; ++node) {
        kernel.lattice().point(node, x);
        tables.terminal[node] = model.terminal_reward(x, muT);
        if (!std::isfinite(tables.terminal[node])) {
            std::ostringstream ss;
            ss << "non-finite terminal reward at node " << node;
            throw std::runtime_error(ss.str());
        }
    }
    return tables;
}

DpSolution dp_backward(const TransitionKernel& kernel, std::span<const double> running_dt,
                       std::span<const double> terminal, std::span<const double> initial_dense,
                       int threads) {
    const int N = kernel.steps(), X = kernel.nodes(), A = kernel.atoms(), S = kernel.stencil();
    DpSolution sol{ValueField(N, X), StrictPolicy(N, X), 0.0};
    for (int x = 0; x < X; ++x) sol.value.at(N, x) = terminal[x];

    for (int t = N - 1; t >= 0; --t) {
        const double* vnext = sol.value.v.data() + static_cast<std::size_t>(t + 1) * X;
        auto slice = [&](std::int64_t lo, std::int64_t hi) {
            for (int x = static_cast<int>(lo); x < hi; ++x) {
                const double* frow = running_dt.data() + (static_cast<std::size_t>(t) * X + x) * A;
                double best = -std::numeric_limits<double>::infinity();
                int best_a = 0;
                const std::int32_t* tg = kernel.row_targets(t, x, 0);
                const double* pr = kernel.row_probs(t, x, 0);
                for (int a = 0; a < A; ++a, tg += S, pr += S) {
                    double q = frow[a];
                    for (int s = 0; s < S; ++s) q += pr[s] * vnext[tg[s]];
                    if (q > best) { best = q; best_a = a; }
                }
                sol.value.at(t, x) = best;
                sol.policy.at(t, x) = best_a;
            }
        };
        if (threads <= 1) slice(0, X);
        else parallel_for(X, threads, slice);
    }
    for (int x = 0; x < X; ++x) {
        if (!std::isfinite(sol.value.at(0, x)))
            throw std::runtime_error("solve_dp: value function is not finite (check coefficients)");
        sol.objective += initial_dense[x] * sol.value.at(0, x);
    }
    return sol;
}

std::vector<std::vector<double>> rollout_dense(const TransitionKernel& kernel,
                                               const RelaxedPolicy& policy,
                                               std::span<const double> initial_dense) {
    const int N = kernel.steps(), X = kernel.nodes(), A = kernel.atoms();
    std::vector<std::vector<double>> marg(N + 1, std::vector<double>(X, 0.0));
    std::copy(initial_dense.begin(), initial_dense.end(), marg[0].begin());
    for (int t = 0; t < N; ++t) {
        std::span<const double> w(policy.w.data() + static_cast<std::size_t>(t) * X * A,
                                  static_cast<std::size_t>(X) * A);
        push_forward_dense(kernel, marg[t], t, w, marg[t + 1]);
    }
    return marg;
}

}  // namespace detail

DpSolution solve_dp(const MFGModel& model, const MeasureFlow& muflow,
                    const TransitionKernel& kernel, int threads) {
    const auto tables = detail::compute_reward_tables(model, muflow, kernel);
    const auto initial = detail::measure_to_dense(kernel.lattice(), model.initial_law);
    return detail::dp_backward(kernel, tables.running, tables.terminal, initial, threads);
}

// ---------------------------------------------------------------------------
// Occupation-measure linear program, solved by a revised primal simplex with
// a product-form basis inverse. The constant-control occupation provides a
// feasible starting basis whose matrix is unit lower block-triangular.

namespace {

struct SparseColumn {
    std::vector<std::int32_t> rows;
    std::vector<double> vals;
};

class RevisedSimplex {
public:
    RevisedSimplex(std::vector<SparseColumn> cols, std::vector<double> cost,
                   std::vector<double> rhs, std::vector<int> initial_basis)
        : cols_(std::move(cols)), cost_(std::move(cost)), rhs_(std::move(rhs)),
          basic_(std::move(initial_basis)) {
        m_ = static_cast<int>(rhs_.size());
        n_ = static_cast<int>(cols_.size());
        in_basis_.assign(n_, false);
        for (int r = 0; r < m_; ++r) in_basis_[basic_[r]] = true;
        refactor();
        xb_ = ftran(rhs_);
    }

    // Maximizes; returns the optimal objective. Throws on iteration overrun.
    double optimize() {
        double cmax = 1e-12;
        for (double c : cost_) cmax = std::max(cmax, std::abs(c));
        const double price_tol = 1e-9 * (1.0 + cmax);
        const double pivot_tol = 1e-10;
        const long max_pivots = 200L + 60L * (m_ + n_);
        int degenerate_streak = 0;
        bool bland = false;

        for (long iter = 0; iter < max_pivots; ++iter) {
            const std::vector<double> y = btran_cost();
            int enter = -1;
            double best_rc = price_tol;
            for (int j = 0; j < n_; ++j) {
                if (in_basis_[j]) continue;
                double rc = cost_[j];
                const SparseColumn& col = cols_[j];
                for (std::size_t k = 0; k < col.rows.size(); ++k)
                    rc -= y[col.rows[k]] * col.vals[k];
                if (bland) {
                    if (rc > price_tol) { enter = j; break; }
                } else if (rc > best_rc) {
                    best_rc = rc;
                    enter = j;
                }
            }
            if (enter < 0) break;  // optimal

            std::vector<double> dense(m_, 0.0);
            const SparseColumn& col = cols_[enter];
            for (std::size_t k = 0; k < col.rows.size(); ++k) dense[col.rows[k]] = col.vals[k];
            const std::vector<double> dir = ftran(dense);

            int leave = -1;
            double theta = std::numeric_limits<double>::infinity();
            for (int r = 0; r < m_; ++r) {
                if (dir[r] <= pivot_tol) continue;
                const double ratio = std::max(0.0, xb_[r]) / dir[r];
                if (ratio < theta - 1e-14 ||
                    (ratio < theta + 1e-14 && leave >= 0 && basic_[r] < basic_[leave])) {
                    theta = ratio;
                    leave = r;
                }
            }
            if (leave < 0) throw std::runtime_error("solve_lp: unbounded direction (corrupt kernel rows?)");

            if (theta <= 1e-13) {
                if (++degenerate_streak > 256) bland = true;
            } else {
                degenerate_streak = 0;
            }

            for (int r = 0; r < m_; ++r) xb_[r] -= theta * dir[r];
            xb_[leave] = theta;
            in_basis_[basic_[leave]] = false;
            in_basis_[enter] = true;
            basic_[leave] = enter;

            etas_.push_back(Eta{leave, dir});
            if (static_cast<int>(etas_.size()) >= 48) {
                refactor();
                xb_ = ftran(rhs_);
            }
            if (iter + 1 == max_pivots)
                throw std::runtime_error("solve_lp: simplex iteration limit exceeded");
        }

        double obj = 0.0;
        for (int r = 0; r < m_; ++r) obj += cost_[basic_[r]] * xb_[r];
        return obj;
    }

    const std::vector<int>& basis() const { return basic_; }
    const std::vector<double>& basic_values() const { return xb_; }

private:
    struct Eta {
        int row;
        std::vector<double> dir;  // B_old^-1 A_enter
    };

    void refactor() {
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
        for (int r = 0; r < m_; ++r) {
            const SparseColumn& col = cols_[basic_[r]];
            for (std::size_t k = 0; k < col.rows.size(); ++k) B(col.rows[k], r) = col.vals[k];
        }
        lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(B);
        etas_.clear();
    }

    // B^-1 v with the product form: base LU, then each eta in order.
    std::vector<double> ftran(const std::vector<double>& v) const {
        Eigen::VectorXd w = lu_.solve(Eigen::Map<const Eigen::VectorXd>(v.data(), m_));
        std::vector<double> z(w.data(), w.data() + m_);
        for (const Eta& e : etas_) {
            const double piv = z[e.row] / e.dir[e.row];
            for (int r = 0; r < m_; ++r) z[r] -= e.dir[r] * piv;
            z[e.row] = piv;
        }
        return z;
    }

    // y with B^T y = c_B: apply eta transposes in reverse, then the base LU.
    std::vector<double> btran_cost() const {
        std::vector<double> v(m_);
        for (int r = 0; r < m_; ++r) v[r] = cost_[basic_[r]];
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
            const Eta& e = *it;
            double s = v[e.row];
            for (int r = 0; r < m_; ++r)
                if (r != e.row) s -= e.dir[r] * v[r];
            v[e.row] = s / e.dir[e.row];
        }
        Eigen::VectorXd y =
            lu_.transpose().solve(Eigen::Map<const Eigen::VectorXd>(v.data(), m_));
        return std::vector<double>(y.data(), y.data() + m_);
    }

    std::vector<SparseColumn> cols_;
    std::vector<double> cost_;
    std::vector<double> rhs_;
    std::vector<int> basic_;
    std::vector<bool> in_basis_;
    std::vector<double> xb_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    std::vector<Eta> etas_;
    int m_ = 0, n_ = 0;
};

}  // namespace

LpSolution solve_lp(const MFGModel& model, const MeasureFlow& muflow,
                    const TransitionKernel& kernel) {
    const int N = kernel.steps(), X = kernel.nodes(), A = kernel.atoms(), S = kernel.stencil();
    const auto tables = detail::compute_reward_tables(model, muflow, kernel);
    const auto initial = detail::measure_to_dense(kernel.lattice(), model.initial_law);

    const int n_occ = N * X * A;
    const int n_vars = n_occ + X;
    const int n_rows = N * X + X;
    auto var_idx = [&](int t, int x, int a) { return (t * X + x) * A + a; };
    auto rho_idx = [&](int x) { return n_occ + x; };
    auto row_idx = [&](int t, int x) { return t * X + x; };  // t = N addresses terminal rows

    std::vector<SparseColumn> cols(n_vars);
    std::vector<double> cost(n_vars);
    for (int t = 0; t < N; ++t)
        for (int x = 0; x < X; ++x)
            for (int a = 0; a < A; ++a) {
                SparseColumn& col = cols[var_idx(t, x, a)];
                col.rows.push_back(row_idx(t, x));
                col.vals.push_back(1.0);
                const std::int32_t* tg = kernel.row_targets(t, x, a);
                const double* pr = kernel.row_probs(t, x, a);
                for (int s = 0; s < S; ++s) {
                    if (pr[s] == 0.0) continue;
                    col.rows.push_back(row_idx(t + 1, tg[s]));
                    col.vals.push_back(-pr[s]);
                }
                cost[var_idx(t, x, a)] = tables.running[var_idx(t, x, a)];
            }
    for (int x = 0; x < X; ++x) {
        cols[rho_idx(x)].rows.push_back(row_idx(N, x));
        cols[rho_idx(x)].vals.push_back(1.0);
        cost[rho_idx(x)] = tables.terminal[x];
    }

    std::vector<double> rhs(n_rows, 0.0);
    for (int x = 0; x < X; ++x) rhs[row_idx(0, x)] = initial[x];

    // Feasible starting basis: the constant-control occupation plus the
    // terminal marginal; its basis matrix is unit lower block-triangular.
    const int a0 = model.controls.default_atom();
    std::vector<int> basis(n_rows);
    for (int t = 0; t < N; ++t)
        for (int x = 0; x < X; ++x) basis[row_idx(t, x)] = var_idx(t, x, a0);
    for (int x = 0; x < X; ++x) basis[row_idx(N, x)] = rho_idx(x);

    RevisedSimplex simplex(std::move(cols), std::move(cost), std::move(rhs), std::move(basis));
    const double objective = simplex.optimize();

    LpSolution sol{OccupationMeasure(N, X, A), objective, 0};
    for (int r = 0; r < n_rows; ++r) {
        const int j = simplex.basis()[r];
        double v = simplex.basic_values()[r];
        if (v < 0.0) v = v > -1e-10 ? 0.0 : v;  // keep real violations visible
        if (j < n_occ) sol.occupation.m[j] = v;
        else sol.occupation.terminal[j - n_occ] = v;
    }
    return sol;
}

double objective_eval(const MFGModel& model, const MeasureFlow& muflow,
                      const StateLattice& lattice, const OccupationMeasure& occ) {
    const int N = occ.N, X = occ.X, A = occ.A;
    if (N < 1 || X < 1 || A < 1) throw std::invalid_argument("objective_eval: empty occupation");
    if (X != lattice.size())
        throw std::invalid_argument("objective_eval: occupation does not live on the lattice");
    for (int t = 0; t < N; ++t) {
        double total = 0.0;
        for (int x = 0; x < X; ++x)
            for (int a = 0; a < A; ++a) {
                const double v = occ.at(t, x, a);
                if (v < -1e-9) throw std::invalid_argument("objective_eval: negative occupation mass");
                total += v;
            }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("objective_eval: time-slice mass differs from one");
    }
    double term_total = 0.0;
    for (int x = 0; x < X; ++x) term_total += occ.terminal[x];
    if (std::abs(term_total - 1.0) > 1e-9)
        throw std::invalid_argument("objective_eval: terminal mass differs from one");

    if (static_cast<int>(muflow.marginals.size()) != N + 1)
        throw std::invalid_argument("objective_eval: flow/occupation step mismatch");

    const double dt = muflow.horizon() / N;
    double x[2];
    double value = 0.0;
    for (int t = 0; t < N; ++t) {
        const double tv = dt * t;
        const DiscreteMeasure& mu = muflow.marginals[t];
        for (int node = 0; node < X; ++node) {
            const double* r = occ.row(t, node);
            lattice.point(node, x);
            for (int a = 0; a < A; ++a) {
                if (r[a] == 0.0) continue;
                value += dt * r[a] * model.running_reward(tv, x, mu, model.controls.atom(a));
            }
        }
    }
    const DiscreteMeasure& muT = muflow.marginals[N];
    for (int node = 0; node < X; ++node) {
        if (occ.terminal[node] == 0.0) continue;
        lattice.point(node, x);
        value += occ.terminal[node] * model.terminal_reward(x, muT);
    }
    return value;
}

double exploitability(const MFGModel& model, const MeasureFlow& muflow,
                      const TransitionKernel& kernel, const OccupationMeasure& occ) {
    return solve_dp(model, muflow, kernel).objective -
           objective_eval(model, muflow, kernel.lattice(), occ);
}

OccupationMeasure occupation_from_policy(const TransitionKernel& kernel,
                                         const RelaxedPolicy& policy,
                                         const DiscreteMeasure& initial) {
    const int N = kernel.steps(), X = kernel.nodes(), A = kernel.atoms();
    if (policy.N != N || policy.X != X || policy.A != A)
        throw std::invalid_argument("occupation_from_policy: policy does not match the kernel grids");
    const auto initial_dense = detail::measure_to_dense(kernel.lattice(), initial);
    const auto marg = detail::rollout_dense(kernel, policy, initial_dense);
    OccupationMeasure occ(N, X, A);
    for (int t = 0; t < N; ++t)
        for (int x = 0; x < X; ++x) {
            const double mx = marg[t][x];
            if (mx == 0.0) continue;
            const double* w = policy.row(t, x);
            double* out = occ.m.data() + (static_cast<std::size_t>(t) * X + x) * A;
            for (int a = 0; a < A; ++a) out[a] = mx * w[a];
        }
    occ.terminal = marg[N];
    return occ;
}

OccupationMeasure occupation_from_policy(const TransitionKernel& kernel,
                                         const StrictPolicy& policy,
                                         const DiscreteMeasure& initial) {
    return occupation_from_policy(kernel, policy.as_relaxed(kernel.atoms()), initial);
}

double occupation_invariant_gap(const OccupationMeasure& occ, const TransitionKernel& kernel,
                                const DiscreteMeasure& initial) {
    const int N = occ.N, X = occ.X, A = occ.A, S = kernel.stencil();
    double gap = 0.0;
    std::vector<double> pushed(X);
    const auto initial_dense = detail::measure_to_dense(kernel.lattice(), initial);
    for (int t = 0; t < N; ++t) {
        double total = 0.0;
        for (int x = 0; x < X; ++x)
            for (int a = 0; a < A; ++a) {
                const double v = occ.at(t, x, a);
                gap = std::max(gap, -v);
                total += v;
            }
        gap = std::max(gap, std::abs(total - 1.0));

        std::fill(pushed.begin(), pushed.end(), 0.0);
        for (int x = 0; x < X; ++x)
            for (int a = 0; a < A; ++a) {
                const double v = occ.at(t, x, a);
                if (v == 0.0) continue;
                const std::int32_t* tg = kernel.row_targets(t, x, a);
                const double* pr = kernel.row_probs(t, x, a);
                for (int s = 0; s < S; ++s) pushed[tg[s]] += v * pr[s];
            }
        for (int x = 0; x < X; ++x) {
            double inflow;
            if (t + 1 < N) {
                inflow = 0.0;
                const double* r = occ.row(t + 1, x);
                for (int a = 0; a < A; ++a) inflow += r[a];
            } else {
                inflow = occ.terminal[x];
            }
            gap = std::max(gap, std::abs(inflow - pushed[x]));
        }
    }
    for (int x = 0; x < X; ++x) {
        double out = 0.0;
        const double* r = occ.row(0, x);
        for (int a = 0; a < A; ++a) out += r[a];
        gap = std::max(gap, std::abs(out - initial_dense[x]));
    }
    double term_total = 0.0;
    for (int x = 0; x < X; ++x) term_total += occ.terminal[x];
    gap = std::max(gap, std::abs(term_total - 1.0));
    return gap;
}

}  // namespace mfg
