#include "mfg/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mfg/parallel.hpp"

namespace mfg {

namespace {

std::string cfl_message(double t, int node, int atom, double max_dt) {
    std::ostringstream ss;
    ss << "CFL violation at (t=" << t << ", node=" << node << ", atom=" << atom
       << "): largest admissible dt is " << max_dt;
    return ss.str();
}

void check_flow_matches_grid(const MeasureFlow& muflow, const TimeGrid& timegrid) {
    if (static_cast<int>(muflow.times.size()) != timegrid.N + 1)
        throw std::invalid_argument("build_kernel: flow must have N+1 marginals");
    for (int i = 0; i <= timegrid.N; ++i)
        if (std::abs(muflow.times[i] - timegrid.time(i)) > 1e-9 * std::max(1.0, timegrid.T))
            throw std::invalid_argument("build_kernel: flow times do not match the time grid");
}

}  // namespace

CflError::CflError(double t_, int node_, int atom_, double max_dt_)
    : std::runtime_error(cfl_message(t_, node_, atom_, max_dt_)),
      t(t_), node(node_), atom(atom_), max_dt(max_dt_) {}

TransitionKernel::TransitionKernel(const StateLattice& lattice, const TimeGrid& timegrid,
                                   int n_atoms, int stencil)
    : lattice_(lattice), timegrid_(timegrid), n_atoms_(n_atoms), stencil_(stencil) {
    const std::size_t total =
        static_cast<std::size_t>(timegrid_.N) * lattice_.size() * n_atoms_ * stencil_;
    targets_.assign(total, 0);
    probs_.assign(total, 0.0);
}

TransitionKernel build_kernel(const MFGModel& model, const MeasureFlow& muflow,
                              const StateLattice& lattice, const TimeGrid& timegrid,
                              int threads) {
    if (model.dim != lattice.dimension())
        throw std::invalid_argument("build_kernel: model/lattice dimension mismatch");
    check_flow_matches_grid(muflow, timegrid);

    const int d = lattice.dimension();
    const int stencil = d == 1 ? 3 : 9;
    const int A = model.controls.count();
    const int X = lattice.size();
    const double dt = timegrid.dt();
    TransitionKernel kernel(lattice, timegrid, A, stencil);

    struct RowError {
        bool cfl = false;
        double t = 0;
        int node = -1, atom = -1;
        double max_dt = 0;
        std::string other;
    };
    std::vector<RowError> errors(std::max(1, threads));

    auto run = [&](std::int64_t lo, std::int64_t hi, RowError& err) {
        double x[2], b[2], ss[4];
        for (std::int64_t t = lo; t < hi; ++t) {
            const DiscreteMeasure& mu = muflow.marginals[t];
            const double tv = timegrid.time(static_cast<int>(t));
            for (int node = 0; node < X; ++node) {
                lattice.point(node, x);
                for (int a = 0; a < A; ++a) {
                    const double* av = model.controls.atom(a);
                    model.drift(tv, x, mu, av, b);
                    model.diffusion_matrix(tv, x, mu, av, ss);

                    // Per-axis upwind weights.
                    double up[2] = {0, 0}, dn[2] = {0, 0}, stay[2] = {1, 1};
                    for (int k = 0; k < d; ++k) {
                        const double skk = ss[k * d + k];
                        if (skk < -1e-12) {
                            err.other = "build_kernel: negative diagonal diffusion";
                            return;
                        }
                        const double h = lattice.cell_width(k);
                        const double diff = std::max(0.0, skk) * dt / (2.0 * h * h);
                        const double bp = std::max(b[k], 0.0), bm = std::max(-b[k], 0.0);
                        up[k] = diff + bp * dt / h;
                        dn[k] = diff + bm * dt / h;
                        double st = 1.0 - up[k] - dn[k];
                        if (st < -1e-12) {
                            if (!err.cfl) {
                                err.cfl = true;
                                err.t = tv;
                                err.node = node;
                                err.atom = a;
                                err.max_dt = h * h / (std::max(0.0, skk) + h * std::abs(b[k]));
                            }
                            return;
                        }
                        stay[k] = std::max(0.0, st);
                    }
                    if (d == 2) {
                        const double scale = std::abs(ss[0]) + std::abs(ss[3]) + 1.0;
                        if (std::abs(ss[1]) > 1e-12 * scale || std::abs(ss[2]) > 1e-12 * scale) {
                            err.other =
                                "build_kernel: d=2 requires diagonal sigma sigma^T (unsupported model)";
                            return;
                        }
                    }

                    std::int32_t* tg = kernel.mutable_targets(static_cast<int>(t), node, a);
                    double* pr = kernel.mutable_probs(static_cast<int>(t), node, a);
                    if (d == 1) {
                        const int i = node;
                        const bool at_lo = i == 0, at_hi = i == X - 1;
                        // Reflecting boundary: outgoing mass stays put.
                        tg[0] = at_lo ? i : i - 1;
                        tg[1] = i;
                        tg[2] = at_hi ? i : i + 1;
                        pr[0] = at_lo ? 0.0 : dn[0];
                        pr[1] = stay[0] + (at_lo ? dn[0] : 0.0) + (at_hi ? up[0] : 0.0);
                        pr[2] = at_hi ? 0.0 : up[0];
                    } else {
                        const int i0 = lattice.index0(node), i1 = lattice.index1(node);
                        double w0[3] = {dn[0], stay[0], up[0]};
                        double w1[3] = {dn[1], stay[1], up[1]};
                        int o0[3] = {i0 - 1, i0, i0 + 1};
                        int o1[3] = {i1 - 1, i1, i1 + 1};
                        // Fold per-axis outflow at the walls into the stay weight.
                        if (i0 == 0) { w0[1] += w0[0]; w0[0] = 0.0; o0[0] = i0; }
                        if (i0 == lattice.axis_count(0) - 1) { w0[1] += w0[2]; w0[2] = 0.0; o0[2] = i0; }
                        if (i1 == 0) { w1[1] += w1[0]; w1[0] = 0.0; o1[0] = i1; }
                        if (i1 == lattice.axis_count(1) - 1) { w1[1] += w1[2]; w1[2] = 0.0; o1[2] = i1; }
                        int s = 0;
                        for (int u = 0; u < 3; ++u)
                            for (int v = 0; v < 3; ++v, ++s) {
                                tg[s] = lattice.flat(o0[u], o1[v]);
                                pr[s] = w0[u] * w1[v];
                            }
                    }
                }
            }
        }
    };

    if (threads <= 1) {
        run(0, timegrid.N, errors[0]);
    } else {
        const std::int64_t chunk = (timegrid.N + threads - 1) / threads;
        parallel_for(timegrid.N, threads, [&](std::int64_t lo, std::int64_t hi) {
            run(lo, hi, errors[static_cast<int>(lo / chunk)]);
        });
    }
    for (const auto& err : errors) {
        if (!err.other.empty()) throw std::invalid_argument(err.other);
        if (err.cfl) throw CflError(err.t, err.node, err.atom, err.max_dt);
    }
    return kernel;
}

double cfl_max_dt(const MFGModel& model, const StateLattice& lattice,
                  std::span<const CflSample> samples) {
    double best = std::numeric_limits<double>::infinity();
    double b[2], ss[4];
    const int d = lattice.dimension();
    for (const CflSample& s : samples) {
        model.drift(s.t, s.x.data(), *s.mu, s.a.data(), b);
        model.diffusion_matrix(s.t, s.x.data(), *s.mu, s.a.data(), ss);
        for (int k = 0; k < d; ++k) {
            const double h = lattice.cell_width(k);
            const double denom = std::max(0.0, ss[k * d + k]) + h * std::abs(b[k]);
            if (denom > 0.0) best = std::min(best, h * h / denom);
        }
    }
    return best;
}

ControlSpace truncate_controls(const ControlSpace& space, int n, double c1) {
    if (n < 1) throw std::invalid_argument("truncate_controls: n must be positive");
    if (!(c1 > 0.0)) throw std::invalid_argument("truncate_controls: c1 must be positive");
    const double radius = std::sqrt(n / (2.0 * c1));
    const int da = space.dimension();
    std::vector<double> kept;
    for (int i = 0; i < space.count(); ++i) {
        double norm2 = 0.0;
        for (int k = 0; k < da; ++k) norm2 += space.atom(i)[k] * space.atom(i)[k];
        if (std::sqrt(norm2) <= radius + 1e-12)
            kept.insert(kept.end(), space.atom(i), space.atom(i) + da);
    }
    if (kept.empty()) {
        double min_norm2 = std::numeric_limits<double>::infinity();
        for (int i = 0; i < space.count(); ++i) {
            double norm2 = 0.0;
            for (int k = 0; k < da; ++k) norm2 += space.atom(i)[k] * space.atom(i)[k];
            min_norm2 = std::min(min_norm2, norm2);
        }
        const long need = static_cast<long>(std::ceil(2.0 * c1 * min_norm2));
        throw std::invalid_argument("truncate_controls: no atom inside radius sqrt(n/(2 c1)); use n >= " +
                                    std::to_string(std::max(1L, need)));
    }
    return ControlSpace(da, std::move(kept), std::min(space.bound(), radius + 1e-12),
                        space.convex_hint());
}

namespace detail {

void push_forward_dense(const TransitionKernel& kernel, std::span<const double> current, int t,
                        std::span<const double> policy_weights, std::span<double> next) {
    const int X = kernel.nodes(), A = kernel.atoms(), S = kernel.stencil();
    std::fill(next.begin(), next.end(), 0.0);
    for (int x = 0; x < X; ++x) {
        const double mx = current[x];
        if (mx == 0.0) continue;
        const double* wrow = policy_weights.data() + static_cast<std::size_t>(x) * A;
        for (int a = 0; a < A; ++a) {
            const double w = mx * wrow[a];
            if (w == 0.0) continue;
            const std::int32_t* tg = kernel.row_targets(t, x, a);
            const double* pr = kernel.row_probs(t, x, a);
            for (int s = 0; s < S; ++s) next[tg[s]] += w * pr[s];
        }
    }
}

DiscreteMeasure dense_to_measure(const StateLattice& lattice, std::span<const double> mass) {
    std::vector<double> coords, masses;
    double pt[2];
    for (int i = 0; i < lattice.size(); ++i) {
        if (mass[i] <= 0.0) continue;
        lattice.point(i, pt);
        for (int k = 0; k < lattice.dimension(); ++k) coords.push_back(pt[k]);
        masses.push_back(mass[i]);
    }
    return DiscreteMeasure::normalized(lattice.dimension(), std::move(coords), std::move(masses));
}

std::vector<double> measure_to_dense(const StateLattice& lattice, const DiscreteMeasure& mu) {
    if (mu.dimension() != lattice.dimension())
        throw std::invalid_argument("measure_to_dense: dimension mismatch");
    std::vector<double> out(lattice.size(), 0.0);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const int idx = lattice.node_at(mu.point(i));
        if (idx < 0)
            throw std::invalid_argument("measure_to_dense: measure is not supported on the lattice");
        out[idx] += mu.mass(i);
    }
    return out;
}

}  // namespace detail

DiscreteMeasure push_forward(const TransitionKernel& kernel, const DiscreteMeasure& marginal,
                             const RelaxedPolicy& policy, int t) {
    if (t < 0 || t >= kernel.steps())
        throw std::out_of_range("push_forward: time index outside the policy range");
    if (policy.N != kernel.steps() || policy.X != kernel.nodes() || policy.A != kernel.atoms())
        throw std::invalid_argument("push_forward: policy does not match the kernel grids");
    std::vector<double> cur = detail::measure_to_dense(kernel.lattice(), marginal);
    std::vector<double> nxt(cur.size(), 0.0);
    std::span<const double> weights(policy.w.data() + static_cast<std::size_t>(t) * policy.X * policy.A,
                                    static_cast<std::size_t>(policy.X) * policy.A);
    detail::push_forward_dense(kernel, cur, t, weights, nxt);
    return detail::dense_to_measure(kernel.lattice(), nxt);
}

}  // namespace mfg
