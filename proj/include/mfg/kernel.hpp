#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfg/grid.hpp"
#include "mfg/measures.hpp"
#include "mfg/model.hpp"
#include "mfg/policy.hpp"

namespace mfg {

/// Raised when the requested time step would produce a negative stencil
/// weight; carries the offending (t, x, a) and the largest admissible dt.
class CflError : public std::runtime_error {
public:
    CflError(double t, int node, int atom, double max_dt);
    double t = 0.0;
    int node = -1;
    int atom = -1;
    double max_dt = 0.0;
};

/// Per-(t, x, a) sparse transition rows of the controlled Markov chain that
/// discretizes the generator. Rows are probability vectors whose mean
/// displacement equals b dt exactly at interior nodes.
class TransitionKernel {
public:
    TransitionKernel(const StateLattice& lattice, const TimeGrid& timegrid, int n_atoms,
                     int stencil);

    const StateLattice& lattice() const { return lattice_; }
    const TimeGrid& timegrid() const { return timegrid_; }
    int steps() const { return timegrid_.N; }
    int nodes() const { return lattice_.size(); }
    int atoms() const { return n_atoms_; }
    int stencil() const { return stencil_; }
    double dt() const { return timegrid_.dt(); }

    std::size_t row_offset(int t, int node, int atom) const {
        return ((static_cast<std::size_t>(t) * nodes() + node) * n_atoms_ + atom) * stencil_;
    }
    const std::int32_t* row_targets(int t, int node, int atom) const {
        return targets_.data() + row_offset(t, node, atom);
    }
    const double* row_probs(int t, int node, int atom) const {
        return probs_.data() + row_offset(t, node, atom);
    }

    std::int32_t* mutable_targets(int t, int node, int atom) {
        return targets_.data() + row_offset(t, node, atom);
    }
    double* mutable_probs(int t, int node, int atom) {
        return probs_.data() + row_offset(t, node, atom);
    }

private:
    StateLattice lattice_;
    TimeGrid timegrid_;
    int n_atoms_;
    int stencil_;
    std::vector<std::int32_t> targets_;
    std::vector<double> probs_;
};

/// Builds the upwind (Kushner-Dupuis style) chain for the model against the
/// given marginal flow. d = 1 uses the three-point stencil
///   p_right = s dt/(2h^2) + b^+ dt/h,  p_left = s dt/(2h^2) + b^- dt/h,
/// with s = sigma sigma^T; d = 2 requires diagonal sigma sigma^T and takes
/// the per-axis product. Boundary nodes reflect: outgoing mass stays put.
/// Throws CflError when some row would need a smaller dt, and
/// std::invalid_argument for non-diagonal diffusion in d = 2.
TransitionKernel build_kernel(const MFGModel& model, const MeasureFlow& muflow,
                              const StateLattice& lattice, const TimeGrid& timegrid,
                              int threads = 1);

struct CflSample {
    double t = 0.0;
    std::array<double, 2> x{};
    const DiscreteMeasure* mu = nullptr;
    std::array<double, 2> a{};
};

/// Largest dt keeping every stencil weight nonnegative over the sample:
/// min of h^2 / (sigma^2 + h |b|) per axis.
double cfl_max_dt(const MFGModel& model, const StateLattice& lattice,
                  std::span<const CflSample> samples);

/// Keeps the atoms with |a| <= r_n = sqrt(n / (2 c1)). Errors when nothing
/// survives; the message names the smallest workable n.
ControlSpace truncate_controls(const ControlSpace& space, int n, double c1);

/// One Kolmogorov forward step of a lattice-supported marginal under a
/// relaxed policy; preserves total mass to 1e-12.
DiscreteMeasure push_forward(const TransitionKernel& kernel, const DiscreteMeasure& marginal,
                             const RelaxedPolicy& policy, int t);

namespace detail {

/// Dense forward step: next[y] += cur[x] * w(t,x,a) * K_t(y|x,a). The weight
/// view returns the policy weight of atom a at (t, x).
void push_forward_dense(const TransitionKernel& kernel, std::span<const double> current,
                        int t, std::span<const double> policy_weights, std::span<double> next);

DiscreteMeasure dense_to_measure(const StateLattice& lattice, std::span<const double> mass);
std::vector<double> measure_to_dense(const StateLattice& lattice, const DiscreteMeasure& mu);

}  // namespace detail

}  // namespace mfg
