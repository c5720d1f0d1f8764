#include "mfg/lq.hpp"

#include <cmath>

namespace mfg::lq {

double critical_c(double T) {
    if (!(T > 0.0)) throw std::invalid_argument("critical_c: T must be positive");
    return -(1.0 + T) / T;
}

std::optional<double> analytic_mean_T(const LQSpec& spec) {
    const double denom = 1.0 + spec.T + spec.c * spec.T;
    if (std::abs(denom) > 1e-12) return spec.mean0 / denom;
    if (spec.mean0 == 0.0) return 0.0;
    return std::nullopt;
}

double analytic_feedback(double t, double x, const LQSpec& spec, double mean_T) {
    return -(x + spec.c * mean_T) / (1.0 + spec.T - t);
}

FdFeedbackField fd_feedback(const LQSpec& spec, double mean_T, double x_lo, double x_hi,
                            int nx, int nt) {
    if (nx < 3 || nt < 1) throw std::invalid_argument("fd_feedback: grid too small");
    // Explicit backward scheme for V_t + V_x^2/4 + (sigma^2/2) V_xx = 0,
    // V(T,x) = -(x + c mean_T)^2. The continuous argmax gives alpha = V_x/2.
    const double h = (x_hi - x_lo) / (nx - 1);
    const double dt = spec.T / nt;
    const double k = spec.c * mean_T;

    FdFeedbackField out;
    out.times.resize(nt + 1);
    out.xs.resize(nx);
    out.alpha.assign(static_cast<std::size_t>(nt + 1) * nx, 0.0);
    for (int i = 0; i <= nt; ++i) out.times[i] = spec.T * i / nt;
    for (int j = 0; j < nx; ++j) out.xs[j] = x_lo + j * h;

    std::vector<double> v(nx), vnext(nx);
    for (int j = 0; j < nx; ++j) {
        const double z = out.xs[j] + k;
        vnext[j] = -z * z;
    }
    auto record = [&](int it, const std::vector<double>& vv) {
        for (int j = 0; j < nx; ++j) {
            double vx;
            if (j == 0) vx = (vv[1] - vv[0]) / h;
            else if (j == nx - 1) vx = (vv[nx - 1] - vv[nx - 2]) / h;
            else vx = (vv[j + 1] - vv[j - 1]) / (2.0 * h);
            out.alpha[static_cast<std::size_t>(it) * nx + j] = 0.5 * vx;
        }
    };
    record(nt, vnext);
    const double half_sig2 = 0.5 * spec.sigma0 * spec.sigma0;
    for (int it = nt - 1; it >= 0; --it) {
        for (int j = 0; j < nx; ++j) {
            double vx, vxx;
            if (j == 0) { vx = (vnext[1] - vnext[0]) / h; vxx = 0.0; }
            else if (j == nx - 1) { vx = (vnext[nx - 1] - vnext[nx - 2]) / h; vxx = 0.0; }
            else {
                vx = (vnext[j + 1] - vnext[j - 1]) / (2.0 * h);
                vxx = (vnext[j + 1] - 2.0 * vnext[j] + vnext[j - 1]) / (h * h);
            }
            v[j] = vnext[j] + dt * (0.25 * vx * vx + half_sig2 * vxx);
        }
        record(it, v);
        std::swap(v, vnext);
    }
    return out;
}

}  // namespace mfg::lq
