#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfg/control.hpp"
#include "mfg/markov.hpp"

namespace mfg {

struct SolveConfig {
    enum class Damping { FictitiousPlay, Constant };
    enum class Method { Dp, Lp };

    Damping damping = Damping::FictitiousPlay;
    double omega = 0.5;  // constant-damping weight, ignored for fictitious play
    double tol = 1e-4;
    int max_iter = 1000;
    Method method = Method::Dp;
    double p = 1.0;  // Wasserstein order for flow residuals
    std::uint64_t seed = 0;
    int threads = 1;
    bool strictify_on_convergence = true;

    void validate() const;
    /// Scale-aware exploitability threshold tol * (1 + |value|).
    double tol_J(double value) const { return tol * (1.0 + std::abs(value)); }
};

enum class SolveStatus { Converged, BudgetExhausted, Oscillating };

std::string to_string(SolveStatus s);

struct IterateRecord {
    double flow_residual = 0.0;
    double exploitability = 0.0;
    double value = 0.0;
    double mean_T = 0.0;
};

struct SolveReport {
    SolveStatus status = SolveStatus::BudgetExhausted;
    std::vector<IterateRecord> iterates;
    MeasureFlow final_flow;
    RelaxedPolicy final_policy;  // fictitious-play average, markov-projected
    std::optional<StrictPolicy> strict_policy;
    std::optional<GapReport> strict_gap;
    double strict_flow_distance = 0.0;

    double final_value = 0.0;
    double final_exploitability = 0.0;
    double final_residual = 0.0;
    double tol_J = 0.0;
    double boundary_mass = 0.0;  // max over t of final-flow mass at boundary nodes
    bool reentry_ok = false;     // independent best-response re-solve at final_flow
    double reentry_residual = 0.0;
    std::optional<ConvexityReport> convexity;  // checked at solver start when hinted
    bool strictify_gate = false;               // convex_hint && convexity check passed

    int iterations() const { return static_cast<int>(iterates.size()); }
};

struct BestResponse {
    MeasureFlow flow;
    OccupationMeasure occupation;
    double value = 0.0;
};

/// One application of the best-response map: solves the control problem
/// against muflow (LP or DP) and rolls the optimizer forward from the
/// initial law.
BestResponse best_response(const MFGModel& model, const MeasureFlow& muflow,
                           const TransitionKernel& kernel, SolveConfig::Method method,
                           int threads = 1);

/// Stagnation detector: true when the best residual of the last 20
/// iterations exceeds 0.9 times the best of the 20 before them while still
/// exceeding tol. Needs at least 40 recorded residuals to fire.
bool detect_oscillation(std::span<const double> residuals, double tol);

/// Damped best-response iteration on marginal flows,
/// mu^{k+1} = mix(mu^k, Phi(mu^k), omega_k), starting from the initial law
/// propagated under the zero (or first) control atom. Stops at CONVERGED
/// (residual <= tol and exploitability <= tol_J), BUDGET_EXHAUSTED, or
/// OSCILLATING; the stagnation detector is armed only under constant
/// damping since the 1/k fictitious-play tail would trip it.
SolveReport iterate(const MFGModel& model, const StateLattice& lattice, const TimeGrid& timegrid,
                    const SolveConfig& config);

struct LadderLevel {
    int n = 0;
    double radius = 0.0;
    int atoms = 0;
    std::string error;  // empty on success
    double value = 0.0;
    double mean_T = 0.0;
    double moment_pprime = 0.0;  // max over t of the p'-moment of the final flow
    std::optional<SolveReport> report;
};

/// Solves the model under the truncated control sets A_n (radius
/// sqrt(n/(2 c1))) for each level; per-level failures are recorded and the
/// ladder continues.
std::vector<LadderLevel> truncation_ladder(const MFGModel& model, const StateLattice& lattice,
                                           const TimeGrid& timegrid, const SolveConfig& config,
                                           std::span<const int> levels);

namespace detail {

MeasureFlow flow_from_dense(const StateLattice& lattice, const TimeGrid& timegrid,
                            const std::vector<std::vector<double>>& dense);

}  // namespace detail

}  // namespace mfg
