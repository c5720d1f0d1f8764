#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mfg/control.hpp"
#include "mfg/kernel.hpp"
#include "mfg/model.hpp"
#include "mfg/policy.hpp"

namespace mfg {

/// Conditional action distribution given (t, x):
/// q(t,x)(a) = m_t(x,a) / sum_a' m_t(x,a'). Nodes with zero mass get a
/// point mass at atom 0; they are never visited, so any fixed choice works.
RelaxedPolicy markov_project(const OccupationMeasure& occ);

/// History-dependent policy: weights over control atoms given the visited
/// node sequence x_0..x_t (size t+1). Weights must sum to one.
using HistoryPolicy = std::function<std::vector<double>(int t, std::span<const int> history)>;

struct MimickingOptions {
    std::uint64_t path_budget = 1'000'000;
    bool mc_fallback = false;
    int mc_paths = 100'000;
    std::uint64_t seed = 0;
};

struct MimickingReport {
    double marginal_tv = 0.0;  // max over t of TV(original marginal, projected marginal)
    double pathlaw_tv = 0.0;   // TV between the two laws on whole paths
    std::uint64_t paths = 0;
    bool exact = true;
};

/// Compares the marginal flow of a history-dependent policy with the flow
/// of its Markovian projection. In exact mode both flows come from full
/// path enumeration and the marginal distance is zero up to roundoff; the
/// path-law distance is generally positive (only marginals are preserved).
MimickingReport mimicking_report(const TransitionKernel& kernel, const HistoryPolicy& policy,
                                 const DiscreteMeasure& initial, const MimickingOptions& opts = {});

/// Just the max-over-time marginal TV from mimicking_report.
double verify_mimicking(const TransitionKernel& kernel, const HistoryPolicy& policy,
                        const DiscreteMeasure& initial, const MimickingOptions& opts = {});

struct GapReport {
    double max_drift_mismatch = 0.0;      // |b(a*) - int b dq| over visited nodes
    double max_diffusion_mismatch = 0.0;  // |ss(a*) - int ss dq| (Frobenius)
    double min_f_surplus = 0.0;           // min of f(a*) - int f dq
    bool constraint_ok = true;            // false when no atom met the f constraint somewhere
    double value_loss_bound = 0.0;        // bound on relaxed value - strict value
    double flow_gap_bound = 0.0;          // bound on the Wasserstein drift of the rollout flows
};

struct StrictifyOptions {
    std::optional<double> tol_f;    // default: 1e-9 scale at representable barycenters,
                                    // f-Lipschitz x atom spacing otherwise
    double visited_mass = 1e-12;    // nodes below this relaxed-rollout mass are not scored
};

/// Strict selection under the convexity assumption: per (t,x) picks the
/// atom matching the (drift, diffusion) barycenter of qhat whose reward
/// does not fall below the barycentric reward. The report bounds the value
/// loss via exact policy evaluation of qhat along the strictified rollout,
/// so actual_loss <= value_loss_bound always.
std::pair<StrictPolicy, GapReport> strictify(const MFGModel& model, const MeasureFlow& muflow,
                                             const TransitionKernel& kernel,
                                             const RelaxedPolicy& qhat,
                                             const StrictifyOptions& opts = {});

/// Monte Carlo paths of the controlled SDE under the Euler scheme: per step
/// sample a ~ q_t(node(X_t)), then X += b dt + sigma sqrt(dt) Z. States are
/// continuous; the policy is read off the nearest lattice node. Per-path
/// RNG substreams make the output identical for every thread count.
struct PathBundle {
    int n_paths = 0;
    int steps = 0;  // N; each path has N+1 states
    int dim = 1;
    std::uint64_t seed = 0;
    std::vector<double> states;  // n_paths * (N+1) * dim

    double state(int path, int t, int k = 0) const {
        return states[(static_cast<std::size_t>(path) * (steps + 1) + t) * dim + k];
    }
};

PathBundle simulate(const MFGModel& model, const MeasureFlow& muflow, const StateLattice& lattice,
                    const TimeGrid& timegrid, const RelaxedPolicy& policy, int n_paths,
                    std::uint64_t seed, int threads = 1);
PathBundle simulate(const MFGModel& model, const MeasureFlow& muflow, const StateLattice& lattice,
                    const TimeGrid& timegrid, const StrictPolicy& policy, int n_paths,
                    std::uint64_t seed, int threads = 1);

/// Empirical per-time node masses of a bundle, binning each state to its
/// nearest lattice node.
std::vector<std::vector<double>> binned_marginals(const PathBundle& bundle,
                                                  const StateLattice& lattice);

/// One row per (path id, time index, coordinates); seed in the metadata.
void save_paths(const std::filesystem::path& file, const PathBundle& bundle);

}  // namespace mfg
