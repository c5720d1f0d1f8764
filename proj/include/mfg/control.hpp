#pragma once

#include <span>
#include <vector>

#include "mfg/kernel.hpp"
#include "mfg/model.hpp"
#include "mfg/policy.hpp"

namespace mfg {

struct DpSolution {
    ValueField value;
    StrictPolicy policy;
    double objective = 0.0;
};

/// Backward dynamic programming over the chain:
///   V(t,x) = max_a [ f(t,x,mu_t,a) dt + sum_y K_t(y|x,a) V(t+1,y) ],
/// V(N,x) = g(x, mu_N), ties broken on the smallest atom index. Returns the
/// argmax policy and the objective sum_x lambda_h(x) V(0,x). Serves as the
/// independent oracle for the occupation LP.
DpSolution solve_dp(const MFGModel& model, const MeasureFlow& muflow,
                    const TransitionKernel& kernel, int threads = 1);

struct LpSolution {
    OccupationMeasure occupation;
    double objective = 0.0;
    int pivots = 0;
};

/// The discrete analog of maximizing over relaxed controls: a linear
/// program over occupation measures
///   max sum_t dt sum_{x,a} m_t(x,a) f + sum_x rho_N(x) g
/// under the Kolmogorov flow constraints, solved by a bundled revised
/// simplex (no external solver). Agrees with solve_dp to 1e-8.
LpSolution solve_lp(const MFGModel& model, const MeasureFlow& muflow,
                    const TransitionKernel& kernel);

/// The LP objective at an occupation measure living on `lattice`. Validates
/// the mass invariants (time slices and terminal marginal sum to one,
/// entries nonnegative) before evaluating.
double objective_eval(const MFGModel& model, const MeasureFlow& muflow,
                      const StateLattice& lattice, const OccupationMeasure& occ);

/// Best achievable objective against muflow minus the objective at occ;
/// nonnegative up to 1e-8 for admissible occupations.
double exploitability(const MFGModel& model, const MeasureFlow& muflow,
                      const TransitionKernel& kernel, const OccupationMeasure& occ);

/// Rolls a policy forward from the initial law: m_t(x,a) = marginal_t(x)
/// q_t(x)(a). Satisfies all occupation invariants by construction.
OccupationMeasure occupation_from_policy(const TransitionKernel& kernel,
                                         const RelaxedPolicy& policy,
                                         const DiscreteMeasure& initial);
OccupationMeasure occupation_from_policy(const TransitionKernel& kernel,
                                         const StrictPolicy& policy,
                                         const DiscreteMeasure& initial);

/// Max violation of the occupation invariants (mass totals, nonnegativity,
/// initial-law match, flow constraints against the kernel).
double occupation_invariant_gap(const OccupationMeasure& occ, const TransitionKernel& kernel,
                                const DiscreteMeasure& initial);

namespace detail {

/// f(t,x,mu_t,a) dt table (N*X*A) and terminal rewards g(x, mu_N) (X) on the
/// kernel grids; cached by the fixed-point driver when mu-independent.
struct RewardTables {
    std::vector<double> running;   // already scaled by dt
    std::vector<double> terminal;
};
RewardTables compute_reward_tables(const MFGModel& model, const MeasureFlow& muflow,
                                   const TransitionKernel& kernel);

DpSolution dp_backward(const TransitionKernel& kernel, std::span<const double> running_dt,
                       std::span<const double> terminal, std::span<const double> initial_dense,
                       int threads);

/// Forward rollout of a relaxed policy given dense initial mass; returns
/// the per-step state marginals (N+1 rows of X).
std::vector<std::vector<double>> rollout_dense(const TransitionKernel& kernel,
                                               const RelaxedPolicy& policy,
                                               std::span<const double> initial_dense);

}  // namespace detail

}  // namespace mfg
