#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

namespace mfg::lq {

/// Linear-quadratic benchmark data: drift a, running reward -a^2, terminal
/// reward -(x + c mean)^2, Gaussian initial law.
struct LQSpec {
    double T = 1.0;
    double c = 0.0;
    double sigma0 = 0.0;
    double mean0 = 0.0;
    double var0 = 0.0;

    LQSpec(double horizon, double coupling, double sigma, double mean, double var)
        : T(horizon), c(coupling), sigma0(sigma), mean0(mean), var0(var) {
        if (!(T > 0.0)) throw std::invalid_argument("LQSpec: T must be positive");
        if (!(sigma0 >= 0.0)) throw std::invalid_argument("LQSpec: sigma0 must be >= 0");
        if (!(var0 >= 0.0)) throw std::invalid_argument("LQSpec: var0 must be >= 0");
    }
};

/// Coupling strength at which the equilibrium mean equation degenerates:
/// -(1+T)/T.
double critical_c(double T);

/// Equilibrium terminal mean mean0 / (1 + T + cT); empty when the
/// denominator vanishes (|1+T+cT| <= 1e-12) with mean0 != 0, and 0 when
/// both vanish.
std::optional<double> analytic_mean_T(const LQSpec& spec);

/// Equilibrium feedback control -(x + c mean_T) / (1 + T - t), obtained
/// from the Riccati recursion P' = P^2, P(T) = 1.
double analytic_feedback(double t, double x, const LQSpec& spec, double mean_T);

/// Independent finite-difference check of the feedback law: solves the HJB
/// equation of the best response to the flow with terminal mean mean_T by
/// an explicit scheme over a dense grid and returns the implied feedback
/// field alpha(t_i, x_j) = V_x / 2.
struct FdFeedbackField {
    std::vector<double> times;   // size nt
    std::vector<double> xs;      // size nx
    std::vector<double> alpha;   // nt * nx, row-major in time
    double at(int it, int ix) const { return alpha[static_cast<std::size_t>(it) * xs.size() + ix]; }
};
FdFeedbackField fd_feedback(const LQSpec& spec, double mean_T, double x_lo, double x_hi,
                            int nx, int nt);

}  // namespace mfg::lq
