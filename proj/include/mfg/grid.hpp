#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfg {

/// Uniform rectangular lattice in d = 1 or 2 dimensions.
///
/// Nodes along axis k sit at lower[k] + i * h[k] for i = 0 .. count[k]-1.
/// The span (upper - lower) must be an integer multiple of h, and every
/// axis needs at least 3 nodes.
class StateLattice {
public:
    struct Axis {
        double lower = 0.0;
        double upper = 0.0;
        double h = 0.0;
    };

    StateLattice(std::vector<Axis> axes) {
        if (axes.empty() || axes.size() > 2)
            throw std::invalid_argument("StateLattice: dimension must be 1 or 2");
        dim_ = static_cast<int>(axes.size());
        for (int k = 0; k < dim_; ++k) {
            const Axis& ax = axes[k];
            if (!std::isfinite(ax.lower) || !std::isfinite(ax.upper))
                throw std::invalid_argument("StateLattice: bounds must be finite");
            if (!(ax.h > 0.0))
                throw std::invalid_argument("StateLattice: cell width must be positive");
            const double span = ax.upper - ax.lower;
            const double steps = span / ax.h;
            const long long n = std::llround(steps);
            if (n < 2 || std::abs(steps - static_cast<double>(n)) > 1e-9 * (std::abs(steps) + 1.0))
                throw std::invalid_argument(
                    "StateLattice: (upper - lower) must be an integer multiple of h "
                    "with at least 3 nodes per axis");
            axes_[k] = ax;
            counts_[k] = static_cast<int>(n) + 1;
        }
        size_ = counts_[0] * (dim_ == 2 ? counts_[1] : 1);
    }

    static StateLattice make_1d(double lower, double upper, double h) {
        return StateLattice({Axis{lower, upper, h}});
    }

    int dimension() const { return dim_; }
    int size() const { return size_; }
    int axis_count(int k) const { return counts_[k]; }
    const Axis& axis(int k) const { return axes_[k]; }
    double cell_width(int k) const { return axes_[k].h; }
    double max_cell_width() const {
        double m = axes_[0].h;
        if (dim_ == 2) m = std::max(m, axes_[1].h);
        return m;
    }

    double coord(int k, int i) const { return axes_[k].lower + i * axes_[k].h; }

    int flat(int i0, int i1 = 0) const { return dim_ == 1 ? i0 : i0 * counts_[1] + i1; }
    int index0(int flat_idx) const { return dim_ == 1 ? flat_idx : flat_idx / counts_[1]; }
    int index1(int flat_idx) const { return dim_ == 1 ? 0 : flat_idx % counts_[1]; }

    /// Writes the coordinates of a node into out[0..dim).
    void point(int flat_idx, double* out) const {
        out[0] = coord(0, index0(flat_idx));
        if (dim_ == 2) out[1] = coord(1, index1(flat_idx));
    }

    /// Nearest node index along one axis, clamped to the lattice.
    int nearest_axis_index(int k, double x) const {
        int i = static_cast<int>(std::llround((x - axes_[k].lower) / axes_[k].h));
        if (i < 0) i = 0;
        if (i >= counts_[k]) i = counts_[k] - 1;
        return i;
    }

    /// Nearest node (flat index) to an arbitrary point, clamped to the box.
    int nearest(const double* x) const {
        const int i0 = nearest_axis_index(0, x[0]);
        const int i1 = dim_ == 2 ? nearest_axis_index(1, x[1]) : 0;
        return flat(i0, i1);
    }

    /// Flat index of the node exactly at x, or -1 if x is farther than tol
    /// from every node.
    int node_at(const double* x, double tol = 1e-9) const {
        const int idx = nearest(x);
        double p[2];
        point(idx, p);
        double err = std::abs(p[0] - x[0]);
        if (dim_ == 2) err = std::max(err, std::abs(p[1] - x[1]));
        return err <= tol ? idx : -1;
    }

    bool is_boundary(int flat_idx) const {
        const int i0 = index0(flat_idx);
        if (i0 == 0 || i0 == counts_[0] - 1) return true;
        if (dim_ == 2) {
            const int i1 = index1(flat_idx);
            if (i1 == 0 || i1 == counts_[1] - 1) return true;
        }
        return false;
    }

private:
    int dim_ = 1;
    std::array<Axis, 2> axes_{};
    std::array<int, 2> counts_{1, 1};
    int size_ = 0;
};

/// Uniform partition of [0, T] into N steps.
struct TimeGrid {
    double T = 1.0;
    int N = 1;

    TimeGrid(double horizon, int steps) : T(horizon), N(steps) {
        if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
        if (N < 1) throw std::invalid_argument("TimeGrid: need at least one step");
    }

    double dt() const { return T / N; }
    double time(int i) const { return T * i / N; }
    std::vector<double> times() const {
        std::vector<double> ts(N + 1);
        for (int i = 0; i <= N; ++i) ts[i] = time(i);
        return ts;
    }
};

}  // namespace mfg
