#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mfg {

/// Relaxed Markovian control: a probability vector over control atoms for
/// every (time step, lattice node).
struct RelaxedPolicy {
    int N = 0;  // time steps
    int X = 0;  // lattice nodes
    int A = 0;  // control atoms
    std::vector<double> w;  // N*X*A, w[(t*X+x)*A+a]

    RelaxedPolicy() = default;
    RelaxedPolicy(int n, int x, int a) : N(n), X(x), A(a), w(static_cast<std::size_t>(n) * x * a, 0.0) {}

    double weight(int t, int x, int a) const { return w[(static_cast<std::size_t>(t) * X + x) * A + a]; }
    double* row(int t, int x) { return w.data() + (static_cast<std::size_t>(t) * X + x) * A; }
    const double* row(int t, int x) const {
        return w.data() + (static_cast<std::size_t>(t) * X + x) * A;
    }
};

/// Strict Markovian control: one atom index per (time step, lattice node).
struct StrictPolicy {
    int N = 0;
    int X = 0;
    std::vector<std::int32_t> atom;  // N*X

    StrictPolicy() = default;
    StrictPolicy(int n, int x) : N(n), X(x), atom(static_cast<std::size_t>(n) * x, 0) {}

    std::int32_t at(int t, int x) const { return atom[static_cast<std::size_t>(t) * X + x]; }
    std::int32_t& at(int t, int x) { return atom[static_cast<std::size_t>(t) * X + x]; }

    RelaxedPolicy as_relaxed(int n_atoms) const {
        RelaxedPolicy q(N, X, n_atoms);
        for (int t = 0; t < N; ++t)
            for (int x = 0; x < X; ++x) q.row(t, x)[at(t, x)] = 1.0;
        return q;
    }
};

/// Discrete occupation measure: joint (state, action) mass per time step
/// plus the terminal state marginal.
struct OccupationMeasure {
    int N = 0;
    int X = 0;
    int A = 0;
    std::vector<double> m;         // N*X*A
    std::vector<double> terminal;  // X

    OccupationMeasure() = default;
    OccupationMeasure(int n, int x, int a)
        : N(n), X(x), A(a), m(static_cast<std::size_t>(n) * x * a, 0.0), terminal(x, 0.0) {}

    double at(int t, int x, int a) const { return m[(static_cast<std::size_t>(t) * X + x) * A + a]; }
    double& at(int t, int x, int a) { return m[(static_cast<std::size_t>(t) * X + x) * A + a]; }
    const double* row(int t, int x) const {
        return m.data() + (static_cast<std::size_t>(t) * X + x) * A;
    }

    /// State marginal at time step t (t = N gives the terminal marginal).
    std::vector<double> state_marginal(int t) const {
        if (t == N) return terminal;
        std::vector<double> out(X, 0.0);
        for (int x = 0; x < X; ++x) {
            const double* r = row(t, x);
            for (int a = 0; a < A; ++a) out[x] += r[a];
        }
        return out;
    }
};

/// Value function on the (time, node) grid, V(N, x) = terminal reward.
struct ValueField {
    int N = 0;
    int X = 0;
    std::vector<double> v;  // (N+1)*X

    ValueField() = default;
    ValueField(int n, int x) : N(n), X(x), v(static_cast<std::size_t>(n + 1) * x, 0.0) {}

    double at(int t, int x) const { return v[static_cast<std::size_t>(t) * X + x]; }
    double& at(int t, int x) { return v[static_cast<std::size_t>(t) * X + x]; }
};

}  // namespace mfg
