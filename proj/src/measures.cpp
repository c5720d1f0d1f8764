#include "mfg/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mfg {

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

double norm_pow(const double* x, int dim, double p) {
    double n2 = x[0] * x[0];
    if (dim == 2) n2 += x[1] * x[1];
    if (p == 2.0) return n2;
    const double n = std::sqrt(n2);
    if (p == 1.0) return n;
    if (p == 0.0) return 1.0;
    return std::pow(n, p);
}

double dist_pow(const double* x, const double* y, int dim, double p) {
    double d[2] = {x[0] - y[0], 0.0};
    if (dim == 2) d[1] = x[1] - y[1];
    return norm_pow(d, dim, p);
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(int dim, std::vector<double> coords,
                                 std::vector<double> masses) {
    if (dim < 1 || dim > 2) throw std::invalid_argument("DiscreteMeasure: dimension must be 1 or 2");
    if (masses.empty()) throw std::invalid_argument("DiscreteMeasure: needs at least one atom");
    if (coords.size() != masses.size() * static_cast<std::size_t>(dim))
        throw std::invalid_argument("DiscreteMeasure: coords/masses size mismatch");
    dim_ = dim;
    coords_ = std::move(coords);
    masses_ = std::move(masses);

    double total = 0.0;
    for (double m : masses_) {
        if (!(m >= 0.0)) throw std::invalid_argument("DiscreteMeasure: negative or NaN mass");
        total += m;
    }
    const double drift = std::abs(total - 1.0);
    if (drift > kMassTol)
        throw std::invalid_argument("DiscreteMeasure: mass total " + fmt17(total) +
                                    " outside [1-1e-12, 1+1e-12]");
    // Renormalize small drift, but leave sub-1e-13 drift alone so that a
    // dumped measure reloads with identical bits.
    if (drift > 1e-13)
        for (double& m : masses_) m /= total;
    sort_and_check_atoms();
}

DiscreteMeasure DiscreteMeasure::normalized(int dim, std::vector<double> coords,
                                            std::vector<double> masses) {
    double total = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0)) throw std::invalid_argument("DiscreteMeasure: negative or NaN mass");
        total += m;
    }
    if (!(total > 0.0)) throw std::invalid_argument("DiscreteMeasure: total mass must be positive");
    for (double& m : masses) m /= total;
    DiscreteMeasure mu;
    mu.dim_ = dim;
    mu.coords_ = std::move(coords);
    mu.masses_ = std::move(masses);
    if (mu.coords_.size() != mu.masses_.size() * static_cast<std::size_t>(dim))
        throw std::invalid_argument("DiscreteMeasure: coords/masses size mismatch");
    mu.sort_and_check_atoms();
    return mu;
}

DiscreteMeasure DiscreteMeasure::dirac(std::span<const double> point) {
    return DiscreteMeasure(static_cast<int>(point.size()),
                           std::vector<double>(point.begin(), point.end()), {1.0});
}

void DiscreteMeasure::sort_and_check_atoms() {
    const std::size_t n = masses_.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        for (int k = 0; k < dim_; ++k) {
            const double xa = coords_[a * dim_ + k], xb = coords_[b * dim_ + k];
            if (xa != xb) return xa < xb;
        }
        return false;
    });
    std::vector<double> c(n * dim_), m(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < dim_; ++k) c[i * dim_ + k] = coords_[order[i] * dim_ + k];
        m[i] = masses_[order[i]];
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        bool same = true;
        for (int k = 0; k < dim_; ++k)
            if (c[i * dim_ + k] != c[(i + 1) * dim_ + k]) { same = false; break; }
        if (same) throw std::invalid_argument("DiscreteMeasure: atom points must be pairwise distinct");
    }
    for (std::size_t i = 0; i < n * static_cast<std::size_t>(dim_); ++i)
        if (!std::isfinite(c[i])) throw std::invalid_argument("DiscreteMeasure: non-finite coordinate");
    coords_ = std::move(c);
    masses_ = std::move(m);
}

double DiscreteMeasure::mean(int k) const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += masses_[i] * coords_[i * dim_ + k];
    return s;
}

double DiscreteMeasure::total_mass() const {
    return std::accumulate(masses_.begin(), masses_.end(), 0.0);
}

MeasureFlow::MeasureFlow(std::vector<double> ts, std::vector<DiscreteMeasure> ms)
    : times(std::move(ts)), marginals(std::move(ms)) {
    if (times.empty() || times.size() != marginals.size())
        throw std::invalid_argument("MeasureFlow: one marginal per time required");
    if (std::abs(times.front()) > 1e-12)
        throw std::invalid_argument("MeasureFlow: times must start at 0");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        if (!(times[i] < times[i + 1]))
            throw std::invalid_argument("MeasureFlow: times must be strictly increasing");
    const int d = marginals.front().dimension();
    for (const auto& m : marginals)
        if (m.dimension() != d)
            throw std::invalid_argument("MeasureFlow: marginals must share one dimension");
}

double moment(const DiscreteMeasure& mu, double p) {
    if (!(p >= 0.0)) throw std::invalid_argument("moment: p must be >= 0");
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        s += mu.mass(i) * norm_pow(mu.point(i), mu.dimension(), p);
    return s;
}

namespace detail {

double transport_cost(std::span<const double> supply, std::span<const double> demand,
                      const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(supply.size());
    const int m = static_cast<int>(demand.size());
    const int V = n + m;
    const double INF = std::numeric_limits<double>::infinity();

    std::vector<double> rs(supply.begin(), supply.end());
    std::vector<double> rd(demand.begin(), demand.end());
    const double total = std::accumulate(rs.begin(), rs.end(), 0.0);
    {   // equalize totals; callers supply probability vectors up to 1e-12 drift
        const double dtot = std::accumulate(rd.begin(), rd.end(), 0.0);
        if (!(dtot > 0.0) || !(total > 0.0))
            throw std::invalid_argument("transport_cost: empty marginals");
        const double scale = total / dtot;
        for (double& d : rd) d *= scale;
    }

    std::vector<double> flow(static_cast<std::size_t>(n) * m, 0.0);
    std::vector<double> pot(V, 0.0), dist(V);
    std::vector<int> parent(V);
    std::vector<char> done(V);

    const double kActive = 1e-14 * std::max(1.0, total);
    const long max_rounds = 4L * V * V + 64;
    for (long round = 0; round < max_rounds; ++round) {
        double remaining = 0.0;
        for (double r : rs) remaining += r;
        if (remaining <= kActive) break;

        // Multi-source Dijkstra on the residual graph with potentials.
        std::fill(dist.begin(), dist.end(), INF);
        std::fill(done.begin(), done.end(), 0);
        std::fill(parent.begin(), parent.end(), -1);
        for (int i = 0; i < n; ++i)
            if (rs[i] > kActive) dist[i] = 0.0;
        for (int iter = 0; iter < V; ++iter) {
            int u = -1;
            double best = INF;
            for (int v = 0; v < V; ++v)
                if (!done[v] && dist[v] < best) { best = dist[v]; u = v; }
            if (u < 0) break;
            done[u] = 1;
            if (u < n) {
                for (int j = 0; j < m; ++j) {
                    const double rc = std::max(0.0, cost[u][j] + pot[u] - pot[n + j]);
                    if (dist[u] + rc < dist[n + j]) {
                        dist[n + j] = dist[u] + rc;
                        parent[n + j] = u;
                    }
                }
            } else {
                const int j = u - n;
                for (int i = 0; i < n; ++i) {
                    if (flow[static_cast<std::size_t>(i) * m + j] <= 0.0) continue;
                    const double rc = std::max(0.0, -cost[i][j] + pot[u] - pot[i]);
                    if (dist[u] + rc < dist[i]) {
                        dist[i] = dist[u] + rc;
                        parent[i] = u;
                    }
                }
            }
        }

        int sink = -1;
        double bestd = INF;
        for (int j = 0; j < m; ++j)
            if (rd[j] > kActive && dist[n + j] < bestd) { bestd = dist[n + j]; sink = n + j; }
        if (sink < 0) throw std::runtime_error("transport_cost: no augmenting path (imbalanced marginals?)");

        for (int v = 0; v < V; ++v) pot[v] += std::min(dist[v], bestd);

        // Bottleneck along the path.
        double amt = rd[sink - n];
        int v = sink;
        while (true) {
            const int u = parent[v];
            if (u < 0) { amt = std::min(amt, rs[v]); break; }  // v is the path's source
            if (u < n) {
                // forward edge u->v, uncapacitated
            } else {
                amt = std::min(amt, flow[static_cast<std::size_t>(v) * m + (u - n)]);
            }
            v = u;
        }
        // Apply.
        rd[sink - n] -= amt;
        v = sink;
        while (true) {
            const int u = parent[v];
            if (u < 0) { rs[v] -= amt; break; }
            if (u < n)
                flow[static_cast<std::size_t>(u) * m + (v - n)] += amt;
            else
                flow[static_cast<std::size_t>(v) * m + (u - n)] -= amt;
            v = u;
        }
        if (round + 1 == max_rounds)
            throw std::runtime_error("transport_cost: augmentation limit exceeded");
    }

    double c = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) c += flow[static_cast<std::size_t>(i) * m + j] * cost[i][j];
    return c;
}

double wasserstein_pp_grid_1d(std::span<const double> a, std::span<const double> b,
                              const StateLattice& lattice, double p) {
    if (lattice.dimension() != 1)
        throw std::invalid_argument("wasserstein_pp_grid_1d: lattice must be 1-d");
    if (a.size() != b.size() || static_cast<int>(a.size()) != lattice.size())
        throw std::invalid_argument("wasserstein_pp_grid_1d: size mismatch");
    // Quantile coupling along the shared grid.
    const int n = lattice.size();
    int i = 0, j = 0;
    double ra = 0.0, rb = 0.0, cost = 0.0;
    while (true) {
        while (i < n && ra <= 0.0) {
            if (a[i] > 0.0) { ra = a[i]; break; }
            ++i;
        }
        while (j < n && rb <= 0.0) {
            if (b[j] > 0.0) { rb = b[j]; break; }
            ++j;
        }
        if (i >= n || j >= n || ra <= 0.0 || rb <= 0.0) break;
        const double amt = std::min(ra, rb);
        if (i != j) {
            const double d = std::abs(lattice.coord(0, i) - lattice.coord(0, j));
            cost += amt * (p == 1.0 ? d : std::pow(d, p));
        }
        ra -= amt;
        rb -= amt;
        if (ra <= 0.0) ++i;
        if (rb <= 0.0) ++j;
    }
    return cost;
}

}  // namespace detail

double wasserstein(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
    if (mu.dimension() != nu.dimension())
        throw std::invalid_argument("wasserstein: dimension mismatch");
    if (!(p >= 1.0)) throw std::invalid_argument("wasserstein: requires p >= 1");
    const int n = static_cast<int>(mu.size()), m = static_cast<int>(nu.size());
    std::vector<std::vector<double>> cost(n, std::vector<double>(m));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            cost[i][j] = dist_pow(mu.point(i), nu.point(j), mu.dimension(), p);
    const double c = detail::transport_cost(mu.masses(), nu.masses(), cost);
    return std::pow(std::max(0.0, c), 1.0 / p);
}

double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
    if (mu.dimension() != 1 || nu.dimension() != 1)
        throw std::invalid_argument("wasserstein_1d: requires dimension 1");
    if (!(p >= 1.0)) throw std::invalid_argument("wasserstein_1d: requires p >= 1");
    // Atoms are stored sorted by coordinate, so this is a straight quantile walk.
    std::size_t i = 0, j = 0;
    double ra = mu.mass(0), rb = nu.mass(0), cost = 0.0;
    while (i < mu.size() && j < nu.size()) {
        const double amt = std::min(ra, rb);
        const double d = std::abs(mu.coord(i, 0) - nu.coord(j, 0));
        cost += amt * (p == 1.0 ? d : std::pow(d, p));
        ra -= amt;
        rb -= amt;
        if (ra <= 0.0) { ++i; if (i < mu.size()) ra = mu.mass(i); }
        if (rb <= 0.0) { ++j; if (j < nu.size()) rb = nu.mass(j); }
    }
    return std::pow(std::max(0.0, cost), 1.0 / p);
}

double flow_distance(const MeasureFlow& f1, const MeasureFlow& f2, double p) {
    if (f1.times.size() != f2.times.size())
        throw std::invalid_argument("flow_distance: time-grid mismatch");
    const double tol = 1e-12 * std::max(1.0, f1.horizon());
    for (std::size_t i = 0; i < f1.times.size(); ++i)
        if (std::abs(f1.times[i] - f2.times[i]) > tol)
            throw std::invalid_argument("flow_distance: time-grid mismatch");
    double best = 0.0;
    for (std::size_t i = 0; i < f1.times.size(); ++i) {
        const double d = f1.dimension() == 1 ? wasserstein_1d(f1.marginals[i], f2.marginals[i], p)
                                             : wasserstein(f1.marginals[i], f2.marginals[i], p);
        best = std::max(best, d);
    }
    return best;
}

DiscreteMeasure mix(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double omega) {
    if (mu.dimension() != nu.dimension()) throw std::invalid_argument("mix: dimension mismatch");
    if (!(omega >= 0.0 && omega <= 1.0)) throw std::invalid_argument("mix: omega must be in [0,1]");
    const int d = mu.dimension();
    std::vector<double> coords, masses;
    coords.reserve((mu.size() + nu.size()) * d);
    masses.reserve(mu.size() + nu.size());
    // Merge-walk over the two sorted atom lists, combining coinciding points.
    std::size_t i = 0, j = 0;
    auto cmp = [&](std::size_t a, std::size_t b) {
        for (int k = 0; k < d; ++k) {
            const double xa = mu.coord(a, k), xb = nu.coord(b, k);
            if (xa != xb) return xa < xb ? -1 : 1;
        }
        return 0;
    };
    auto push = [&](const double* x, double m) {
        if (m == 0.0) return;
        for (int k = 0; k < d; ++k) coords.push_back(x[k]);
        masses.push_back(m);
    };
    while (i < mu.size() || j < nu.size()) {
        if (j >= nu.size()) { push(mu.point(i), (1.0 - omega) * mu.mass(i)); ++i; continue; }
        if (i >= mu.size()) { push(nu.point(j), omega * nu.mass(j)); ++j; continue; }
        const int c = cmp(i, j);
        if (c < 0) { push(mu.point(i), (1.0 - omega) * mu.mass(i)); ++i; }
        else if (c > 0) { push(nu.point(j), omega * nu.mass(j)); ++j; }
        else {
            push(mu.point(i), (1.0 - omega) * mu.mass(i) + omega * nu.mass(j));
            ++i; ++j;
        }
    }
    return DiscreteMeasure::normalized(d, std::move(coords), std::move(masses));
}

namespace {

double bump(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

// Simpson integral of psi_n(y - x) over an axis-aligned cell (1-d) or
// rectangle (2-d), clipped to nothing (the bump vanishes outside |u| < 1).
double cell_bump_integral_1d(double x, int n, double lo, double hi) {
    constexpr int kSub = 32;
    const double h = (hi - lo) / kSub;
    double s = 0.0;
    for (int i = 0; i <= kSub; ++i) {
        const double u = ((lo + i * h) - x) * n;
        const double w = (i == 0 || i == kSub) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w * bump(u * u);
    }
    return s * h / 3.0;
}

double cell_bump_integral_2d(const double* x, int n, double lo0, double hi0, double lo1,
                             double hi1) {
    constexpr int kSub = 16;
    const double h0 = (hi0 - lo0) / kSub, h1 = (hi1 - lo1) / kSub;
    double s = 0.0;
    for (int i = 0; i <= kSub; ++i) {
        const double wi = (i == 0 || i == kSub) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double u0 = ((lo0 + i * h0) - x[0]) * n;
        for (int j = 0; j <= kSub; ++j) {
            const double wj = (j == 0 || j == kSub) ? 1.0 : (j % 2 ? 4.0 : 2.0);
            const double u1 = ((lo1 + j * h1) - x[1]) * n;
            s += wi * wj * bump(u0 * u0 + u1 * u1);
        }
    }
    return s * h0 * h1 / 9.0;
}

}  // namespace

DiscreteMeasure mollify(const DiscreteMeasure& mu, int n, const StateLattice& lattice) {
    if (n < 1) throw std::invalid_argument("mollify: n must be positive");
    if (mu.dimension() != lattice.dimension())
        throw std::invalid_argument("mollify: measure/lattice dimension mismatch");
    const double bw = 1.0 / n;
    for (int k = 0; k < lattice.dimension(); ++k)
        if (lattice.cell_width(k) > bw + 1e-15)
            throw std::invalid_argument("mollify: lattice too coarse to resolve bandwidth 1/n (cell width " +
                                        fmt17(lattice.cell_width(k)) + " > " + fmt17(bw) + ")");

    // Each inter-node cell's mass under psi_n( . - x) goes to the cell
    // endpoint closer to the atom. The induced transport map contracts
    // toward the atom (never moves mass farther than the convolution did),
    // so the Wasserstein bound of the convolution lemma carries over to the
    // discretization for lattice-supported atoms.
    const int d = lattice.dimension();
    std::vector<double> dense(lattice.size(), 0.0);
    std::vector<int> window_idx;
    std::vector<double> window_w;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double* x = mu.point(i);
        window_idx.clear();
        window_w.clear();
        // Cell index ranges per axis (cells [z_j, z_{j+1}] with j in [lo, hi)).
        int lo[2] = {0, 0}, hi[2] = {1, 1};
        for (int k = 0; k < d; ++k) {
            const auto& ax = lattice.axis(k);
            lo[k] = std::max(0, static_cast<int>(std::floor((x[k] - bw - ax.lower) / ax.h)));
            hi[k] = std::min(lattice.axis_count(k) - 1,
                             static_cast<int>(std::ceil((x[k] + bw - ax.lower) / ax.h)));
        }
        auto closer_index = [&](int k, int j) {  // endpoint of cell j nearer to the atom
            const double zl = lattice.coord(k, j), zr = lattice.coord(k, j + 1);
            return std::abs(zl - x[k]) <= std::abs(zr - x[k]) ? j : j + 1;
        };
        double wsum = 0.0;
        if (d == 1) {
            for (int j = lo[0]; j < hi[0]; ++j) {
                const double w =
                    cell_bump_integral_1d(x[0], n, lattice.coord(0, j), lattice.coord(0, j + 1));
                if (w <= 0.0) continue;
                window_idx.push_back(closer_index(0, j));
                window_w.push_back(w);
                wsum += w;
            }
        } else {
            for (int j0 = lo[0]; j0 < hi[0]; ++j0)
                for (int j1 = lo[1]; j1 < hi[1]; ++j1) {
                    const double w = cell_bump_integral_2d(
                        x, n, lattice.coord(0, j0), lattice.coord(0, j0 + 1), lattice.coord(1, j1),
                        lattice.coord(1, j1 + 1));
                    if (w <= 0.0) continue;
                    window_idx.push_back(lattice.flat(closer_index(0, j0), closer_index(1, j1)));
                    window_w.push_back(w);
                    wsum += w;
                }
        }
        if (wsum <= 0.0) {
            // Atom outside the lattice box; all its mass goes to the closest node.
            dense[lattice.nearest(x)] += mu.mass(i);
            continue;
        }
        const double scale = mu.mass(i) / wsum;
        for (std::size_t t = 0; t < window_idx.size(); ++t)
            dense[window_idx[t]] += scale * window_w[t];
    }

    std::vector<double> coords, masses;
    double pt[2];
    for (int idx = 0; idx < lattice.size(); ++idx) {
        if (dense[idx] <= 0.0) continue;
        lattice.point(idx, pt);
        for (int k = 0; k < d; ++k) coords.push_back(pt[k]);
        masses.push_back(dense[idx]);
    }
    return DiscreteMeasure::normalized(d, std::move(coords), std::move(masses));
}

// ---------------------------------------------------------------------------
// Dump format

void write_measure(std::ostream& os, const DiscreteMeasure& mu, int time_index) {
    for (std::size_t i = 0; i < mu.size(); ++i) {
        os << time_index;
        for (int k = 0; k < mu.dimension(); ++k) os << ',' << fmt17(mu.coord(i, k));
        os << ',' << fmt17(mu.mass(i)) << '\n';
    }
}

namespace {

void write_header(std::ostream& os, int dim) {
    os << "time_index";
    for (int k = 0; k < dim; ++k) os << ",x" << k;
    os << ",mass\n";
}

struct DumpRow {
    int time_index;
    double coords[2];
    double mass;
};

struct ParsedDump {
    int dim = 0;
    std::vector<double> times;
    std::vector<DumpRow> rows;
};

ParsedDump parse_dump(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open measure file: " + file.string());
    ParsedDump out;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key == "times") {
                double t;
                while (ss >> t) out.times.push_back(t);
            }
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            out.dim = static_cast<int>(std::count(line.begin(), line.end(), ',')) - 1;
            if (out.dim < 1 || out.dim > 2)
                throw std::runtime_error("measure file header must name x0[,x1]: " + file.string());
            continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        DumpRow row{};
        ss >> row.time_index;
        for (int k = 0; k < out.dim; ++k) ss >> row.coords[k];
        ss >> row.mass;
        if (!ss) throw std::runtime_error("malformed measure row: " + line);
        out.rows.push_back(row);
    }
    if (!header_seen) throw std::runtime_error("measure file missing header row: " + file.string());
    return out;
}

DiscreteMeasure rows_to_measure(const ParsedDump& dump, int time_index) {
    std::vector<double> coords, masses;
    for (const auto& r : dump.rows) {
        if (r.time_index != time_index) continue;
        for (int k = 0; k < dump.dim; ++k) coords.push_back(r.coords[k]);
        masses.push_back(r.mass);
    }
    if (masses.empty())
        throw std::runtime_error("measure dump has no atoms for time index " + std::to_string(time_index));
    return DiscreteMeasure(dump.dim, std::move(coords), std::move(masses));
}

}  // namespace

void save_measure(const std::filesystem::path& file, const DiscreteMeasure& mu) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write measure file: " + file.string());
    write_header(os, mu.dimension());
    write_measure(os, mu, -1);
}

DiscreteMeasure load_measure(const std::filesystem::path& file) {
    return rows_to_measure(parse_dump(file), -1);
}

void save_flow(const std::filesystem::path& file, const MeasureFlow& flow) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write flow file: " + file.string());
    os << "# times";
    for (double t : flow.times) os << ' ' << fmt17(t);
    os << '\n';
    write_header(os, flow.dimension());
    for (std::size_t i = 0; i < flow.marginals.size(); ++i)
        write_measure(os, flow.marginals[i], static_cast<int>(i));
}

MeasureFlow load_flow(const std::filesystem::path& file) {
    const ParsedDump dump = parse_dump(file);
    if (dump.times.empty())
        throw std::runtime_error("flow file missing '# times' metadata: " + file.string());
    std::vector<DiscreteMeasure> marginals;
    marginals.reserve(dump.times.size());
    for (std::size_t i = 0; i < dump.times.size(); ++i)
        marginals.push_back(rows_to_measure(dump, static_cast<int>(i)));
    return MeasureFlow(dump.times, std::move(marginals));
}

}  // namespace mfg
