#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfg/grid.hpp"
#include "mfg/lq.hpp"
#include "mfg/measures.hpp"

namespace mfg {

/// Growth constants and exponents of the standing assumptions. p_prime > p
/// may deliberately fail (the LQ family records the violation instead of
/// rejecting it).
struct GrowthConstants {
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 1.0;
    double p = 1.0;
    double p_prime = 2.0;
    double p_sigma = 0.0;

    GrowthConstants() = default;
    GrowthConstants(double c1_, double c2_, double c3_, double p_, double p_prime_, double p_sigma_);

    bool p_prime_gt_p() const { return p_prime > p; }
};

/// Finite control grid: the discretized control space A.
class ControlSpace {
public:
    ControlSpace(int dim, std::vector<double> atoms_flat, double bound, bool convex_hint);

    /// count atoms uniformly spaced on [lo, hi], scalar controls.
    static ControlSpace uniform_1d(double lo, double hi, int count, bool convex_hint);

    int dimension() const { return dim_; }
    int count() const { return static_cast<int>(atoms_.size()) / dim_; }
    const double* atom(int i) const { return atoms_.data() + static_cast<std::size_t>(i) * dim_; }
    double scalar_atom(int i) const { return atoms_[static_cast<std::size_t>(i) * dim_]; }
    double bound() const { return bound_; }
    bool convex_hint() const { return convex_hint_; }
    std::span<const double> atoms_flat() const { return atoms_; }

    /// Index of an atom equal to zero if present, else 0. Used as the
    /// documented initialization control.
    int default_atom() const;

private:
    int dim_ = 1;
    std::vector<double> atoms_;
    double bound_ = 0.0;
    bool convex_hint_ = false;
};

/// A mean field game instance: coefficient evaluators plus growth data and
/// the control grid. Evaluators must be pure functions of their arguments;
/// mu enters only through a single-time DiscreteMeasure.
struct MFGModel {
    using DriftFn =
        std::function<void(double t, const double* x, const DiscreteMeasure& mu, const double* a, double* out)>;
    using VolFn =
        std::function<void(double t, const double* x, const DiscreteMeasure& mu, const double* a, double* out)>;
    using RunRewardFn =
        std::function<double(double t, const double* x, const DiscreteMeasure& mu, const double* a)>;
    using TermRewardFn = std::function<double(const double* x, const DiscreteMeasure& mu)>;

    int dim = 1;        // state dimension d
    int noise_dim = 1;  // columns of sigma
    double horizon = 1.0;
    DiscreteMeasure initial_law;
    DriftFn drift;                 // out[dim]
    VolFn volatility;              // out[dim * noise_dim], row-major
    RunRewardFn running_reward;
    TermRewardFn terminal_reward;
    GrowthConstants constants;
    ControlSpace controls;

    // Declared mu-dependence; lets the solver cache kernels and reward
    // tables when the corresponding coefficient ignores the measure.
    bool drift_mu_free = false;
    bool volatility_mu_free = false;
    bool running_reward_mu_free = false;
    bool terminal_reward_mu_free = false;

    bool dynamics_mu_free() const { return drift_mu_free && volatility_mu_free; }

    /// sigma sigma^T at one point, out[dim*dim] row-major.
    void diffusion_matrix(double t, const double* x, const DiscreteMeasure& mu, const double* a,
                          double* out) const;
};

// ---------------------------------------------------------------------------
// Assumption validators

struct GrowthSample {
    double t = 0.0;
    std::array<double, 2> x{};
    const DiscreteMeasure* mu = nullptr;
    std::array<double, 2> a{};
};

struct CheckResult {
    std::string name;
    double worst_slack = 0.0;  // max over samples of (lhs - rhs); <= 0 means the bound holds
    int worst_sample = -1;
    bool pass = true;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool all_pass = true;
    bool p_prime_gt_p = true;  // carried over from the constants; false for LQ-style data

    const CheckResult* find(const std::string& name) const;
};

/// Evaluates the growth bounds (Lipschitz-in-x, drift growth, diffusion
/// growth) and the two-sided reward bounds at every sample. The Lipschitz
/// check pairs samples that share t, mu, and a. Violations land in the
/// report; nothing throws.
ValidationReport validate_growth(const MFGModel& model, std::span<const GrowthSample> samples);

enum class ConvexityStatus { Pass, Fail, Inconclusive };

struct ConvexityReport {
    ConvexityStatus status = ConvexityStatus::Inconclusive;
    double worst_match_err = 0.0;  // worst distance of a combined (b, sigma sigma^T) to its nearest atom
    double worst_f_gap = 0.0;      // most negative f(a*) - combined_f observed (>= 0 when clean)
    double tol_match = 0.0;
    double tol_f = 0.0;
    int draws = 0;
};

struct ConvexityOptions {
    int draws = 100;
    std::uint64_t seed = 1;
    std::optional<double> tol_match;  // default: half the coarsest nearest-neighbor
                                      // gap of the atom images in (b, sigma sigma^T)-space
    std::optional<double> tol_f;      // default: Lipschitz estimate of f over that image times 2 tol_match
    // Explicit combinations (weights over atoms, one vector per combination)
    // checked in addition to the random draws.
    std::vector<std::vector<double>> combinations;
};

/// Sampled analog of the convexity assumption on the discrete control set:
/// random (and explicitly supplied) convex combinations of the atom images
/// must be matched in (b, sigma sigma^T) by some atom whose f does not fall
/// below the combined f. Sampling can refute but never prove convexity;
/// borderline matches yield Inconclusive.
ConvexityReport check_convexity(const MFGModel& model, double t, const double* x,
                                const DiscreteMeasure& mu, const ConvexityOptions& opts = {});

// ---------------------------------------------------------------------------
// Builtin families

/// Gaussian(mean, var) integrated over lattice cells and renormalized;
/// var = 0 collapses to the nearest node.
DiscreteMeasure discretize_gaussian_1d(const StateLattice& lattice, double mean, double var);

/// The linear-quadratic instance: b = a, sigma = sigma0, f = -a^2,
/// g = -(x + c mean)^2, lambda = Gaussian(mean0, var0) discretized onto the
/// lattice. Constants are set with p = p' = 2, so p' > p is recorded as
/// violated.
MFGModel lq_model(const lq::LQSpec& spec, const StateLattice& lattice, ControlSpace controls);

}  // namespace mfg
