#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "mfg/grid.hpp"

namespace mfg {

/// Atomic probability measure on R^d, d in {1,2}.
///
/// Atom points are pairwise distinct and masses are nonnegative. The mass
/// total must be within 1e-12 of one at construction; within that tolerance
/// the measure is renormalized exactly, beyond it construction fails.
class DiscreteMeasure {
public:
    static constexpr double kMassTol = 1e-12;

    /// Strict constructor: enforces the mass-total tolerance.
    DiscreteMeasure(int dim, std::vector<double> coords, std::vector<double> masses);

    /// Scales masses to total exactly one. Total must be positive.
    /// Intended for callers that produce proportional weights (mixing,
    /// mollification, pushing forward).
    static DiscreteMeasure normalized(int dim, std::vector<double> coords,
                                      std::vector<double> masses);

    static DiscreteMeasure dirac(std::span<const double> point);
    static DiscreteMeasure dirac1d(double x) { return dirac(std::span<const double>(&x, 1)); }

    int dimension() const { return dim_; }
    std::size_t size() const { return masses_.size(); }
    const double* point(std::size_t i) const { return coords_.data() + i * dim_; }
    double coord(std::size_t i, int k) const { return coords_[i * dim_ + k]; }
    double mass(std::size_t i) const { return masses_[i]; }
    std::span<const double> masses() const { return masses_; }
    std::span<const double> coords() const { return coords_; }

    double mean(int k = 0) const;
    double total_mass() const;

private:
    DiscreteMeasure() = default;
    void sort_and_check_atoms();

    int dim_ = 1;
    std::vector<double> coords_;  // size() * dim_, atom i at coords_[i*dim_ .. ]
    std::vector<double> masses_;
};

/// Time-indexed family of marginals on a shared dimension. times[0] = 0 and
/// times.back() = T; times strictly increasing.
struct MeasureFlow {
    std::vector<double> times;
    std::vector<DiscreteMeasure> marginals;

    MeasureFlow() = default;  // empty placeholder; filled flows come from the validating ctor
    MeasureFlow(std::vector<double> ts, std::vector<DiscreteMeasure> ms);
    int dimension() const { return marginals.front().dimension(); }
    double horizon() const { return times.back(); }
};

/// |mu|^p = sum_i mass_i |point_i|^p (Euclidean norm), p >= 0.
double moment(const DiscreteMeasure& mu, double p);

/// p-Wasserstein distance via the exact transport linear program over
/// couplings of the two atom sets. Requires matching dimensions and p >= 1.
double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

/// Fast 1-d path through the quantile representation; agrees with the
/// transport LP to 1e-9. Requires dimension 1.
double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

/// max over shared times of the per-time Wasserstein distance. The two
/// flows must have identical time grids. Uses the quantile path in d = 1.
double flow_distance(const MeasureFlow& f1, const MeasureFlow& f2, double p);

/// Convex combination (1-omega) mu + omega nu; masses at coinciding atom
/// points are merged. omega in [0,1].
DiscreteMeasure mix(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double omega);

/// Convolution with the bump kernel psi_n(x) = n^d psi(n x), where psi is
/// the normalized C-infinity bump exp(-1/(1-|x|^2)) on |x| < 1, discretized
/// onto the lattice nodes and renormalized. Fails if any lattice cell is
/// wider than the bandwidth 1/n.
DiscreteMeasure mollify(const DiscreteMeasure& mu, int n, const StateLattice& lattice);

/// Measure dump format: '#'-prefixed metadata lines, then a header row,
/// then one row per atom: time-index (-1 for standalone measures),
/// coordinates, mass. Floats printed with 17 significant digits so that
/// load(dump(x)) == x bitwise.
void save_measure(const std::filesystem::path& file, const DiscreteMeasure& mu);
DiscreteMeasure load_measure(const std::filesystem::path& file);
void save_flow(const std::filesystem::path& file, const MeasureFlow& flow);
MeasureFlow load_flow(const std::filesystem::path& file);

void write_measure(std::ostream& os, const DiscreteMeasure& mu, int time_index = -1);

namespace detail {

/// W_p^p between two nonnegative mass vectors on the nodes of a shared 1-d
/// grid (vectors must have equal totals; used by the solver fast path).
double wasserstein_pp_grid_1d(std::span<const double> a, std::span<const double> b,
                              const StateLattice& lattice, double p);

/// Exact min-cost transport between weighted point clouds; returns total
/// cost sum flow_ij * cost_ij. Supplies/demands must have equal totals.
double transport_cost(std::span<const double> supply, std::span<const double> demand,
                      const std::vector<std::vector<double>>& cost);

}  // namespace detail

}  // namespace mfg
