#include "mfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace mfg {

namespace {

double vec_norm(const double* x, int dim) {
    double s = x[0] * x[0];
    for (int k = 1; k < dim; ++k) s += x[k] * x[k];
    return std::sqrt(s);
}

double frob_norm(std::span<const double> m) {
    double s = 0.0;
    for (double v : m) s += v * v;
    return std::sqrt(s);
}

}  // namespace

GrowthConstants::GrowthConstants(double c1_, double c2_, double c3_, double p_, double p_prime_,
                                 double p_sigma_)
    : c1(c1_), c2(c2_), c3(c3_), p(p_), p_prime(p_prime_), p_sigma(p_sigma_) {
    if (!(c1 > 0.0 && c2 > 0.0 && c3 > 0.0))
        throw std::invalid_argument("GrowthConstants: c1, c2, c3 must be positive");
    if (!(p >= 1.0)) throw std::invalid_argument("GrowthConstants: p must be >= 1");
    if (!(p_prime > 0.0)) throw std::invalid_argument("GrowthConstants: p_prime must be positive");
    if (!(p_sigma >= 0.0 && p_sigma <= 2.0))
        throw std::invalid_argument("GrowthConstants: p_sigma must be in [0,2]");
    if (!(p >= p_sigma)) throw std::invalid_argument("GrowthConstants: requires p >= p_sigma");
}

ControlSpace::ControlSpace(int dim, std::vector<double> atoms_flat, double bound, bool convex_hint)
    : dim_(dim), atoms_(std::move(atoms_flat)), bound_(bound), convex_hint_(convex_hint) {
    if (dim_ < 1 || dim_ > 2) throw std::invalid_argument("ControlSpace: control dimension must be 1 or 2");
    if (atoms_.empty() || atoms_.size() % dim_ != 0)
        throw std::invalid_argument("ControlSpace: atom list empty or malformed");
    const int n = count();
    for (int i = 0; i < n; ++i) {
        if (vec_norm(atom(i), dim_) > bound_ + 1e-12)
            throw std::invalid_argument("ControlSpace: atom outside the declared bound");
        for (int j = i + 1; j < n; ++j) {
            bool same = true;
            for (int k = 0; k < dim_; ++k)
                if (atom(i)[k] != atom(j)[k]) { same = false; break; }
            if (same) throw std::invalid_argument("ControlSpace: atoms must be pairwise distinct");
        }
    }
}

ControlSpace ControlSpace::uniform_1d(double lo, double hi, int count, bool convex_hint) {
    if (count < 1) throw std::invalid_argument("ControlSpace: need at least one atom");
    if (count > 1 && !(hi > lo)) throw std::invalid_argument("ControlSpace: requires hi > lo");
    std::vector<double> atoms(count);
    for (int i = 0; i < count; ++i)
        atoms[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    const double bound = std::max(std::abs(lo), std::abs(hi));
    return ControlSpace(1, std::move(atoms), bound, convex_hint);
}

int ControlSpace::default_atom() const {
    for (int i = 0; i < count(); ++i)
        if (vec_norm(atom(i), dim_) == 0.0) return i;
    return 0;
}

void MFGModel::diffusion_matrix(double t, const double* x, const DiscreteMeasure& mu,
                                const double* a, double* out) const {
    double sig[4];  // dim * noise_dim, dim, noise_dim <= 2
    volatility(t, x, mu, a, sig);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            double s = 0.0;
            for (int k = 0; k < noise_dim; ++k) s += sig[i * noise_dim + k] * sig[j * noise_dim + k];
            out[i * dim + j] = s;
        }
}

// ---------------------------------------------------------------------------
// validate_growth

const CheckResult* ValidationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

ValidationReport validate_growth(const MFGModel& model, std::span<const GrowthSample> samples) {
    if (samples.empty()) throw std::invalid_argument("validate_growth: sample cloud is empty");
    const GrowthConstants& gc = model.constants;
    const int d = model.dim;

    ValidationReport report;
    report.p_prime_gt_p = gc.p_prime_gt_p();
    report.checks.reserve(6);  // references below must stay valid
    auto track = [&report](const std::string& name) -> CheckResult& {
        report.checks.push_back(CheckResult{name, -std::numeric_limits<double>::infinity(), -1, true});
        return report.checks.back();
    };
    CheckResult& lip = track("lipschitz_x");
    CheckResult& bg = track("drift_growth");
    CheckResult& sg = track("diffusion_growth");
    CheckResult& gb = track("terminal_bound");
    CheckResult& fu = track("running_upper");
    CheckResult& fl = track("running_lower");
    auto update = [](CheckResult& c, double slack, int idx) {
        if (slack > c.worst_slack) { c.worst_slack = slack; c.worst_sample = idx; }
    };

    std::vector<double> b(d), sig(static_cast<std::size_t>(d) * model.noise_dim), ss(d * d);
    std::vector<double> b2(d), sig2(sig.size());
    std::vector<double> mu_moment_p(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        mu_moment_p[i] = moment(*samples[i].mu, gc.p);

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const GrowthSample& s = samples[i];
        const double xn = vec_norm(s.x.data(), d);
        const double an = vec_norm(s.a.data(), model.controls.dimension());
        const double mu_p = mu_moment_p[i];

        model.drift(s.t, s.x.data(), *s.mu, s.a.data(), b.data());
        model.diffusion_matrix(s.t, s.x.data(), *s.mu, s.a.data(), ss.data());
        const double f = model.running_reward(s.t, s.x.data(), *s.mu, s.a.data());
        const double g = model.terminal_reward(s.x.data(), *s.mu);

        update(bg, vec_norm(b.data(), d) -
                       gc.c1 * (1.0 + xn + std::pow(mu_p, 1.0 / gc.p) + an),
               static_cast<int>(i));
        update(sg, frob_norm(ss) -
                       gc.c1 * (1.0 + std::pow(xn, gc.p_sigma) + std::pow(mu_p, gc.p_sigma / gc.p) +
                                std::pow(an, gc.p_sigma)),
               static_cast<int>(i));
        const double reward_scale = 1.0 + std::pow(xn, gc.p) + mu_p;
        update(gb, std::abs(g) - gc.c2 * reward_scale, static_cast<int>(i));
        update(fu, f - (gc.c2 * reward_scale - gc.c3 * std::pow(an, gc.p_prime)), static_cast<int>(i));
        update(fl, -gc.c2 * (reward_scale + std::pow(an, gc.p_prime)) - f, static_cast<int>(i));

        // Lipschitz in x against later samples sharing (t, mu, a).
        for (std::size_t j = i + 1; j < samples.size(); ++j) {
            const GrowthSample& r = samples[j];
            if (r.t != s.t || r.mu != s.mu || r.a != s.a) continue;
            double dx[2] = {r.x[0] - s.x[0], r.x[1] - s.x[1]};
            const double dxn = vec_norm(dx, d);
            if (dxn == 0.0) continue;
            model.drift(r.t, r.x.data(), *r.mu, r.a.data(), b2.data());
            model.volatility(s.t, s.x.data(), *s.mu, s.a.data(), sig.data());
            model.volatility(r.t, r.x.data(), *r.mu, r.a.data(), sig2.data());
            double db[2] = {b2[0] - b[0], d == 2 ? b2[1] - b[1] : 0.0};
            double dsig = 0.0;
            for (std::size_t k = 0; k < sig.size(); ++k) dsig += (sig2[k] - sig[k]) * (sig2[k] - sig[k]);
            update(lip, vec_norm(db, d) + std::sqrt(dsig) - gc.c1 * dxn, static_cast<int>(i));
        }
    }

    for (auto& c : report.checks) {
        if (c.worst_sample < 0) c.worst_slack = 0.0;  // no applicable pair/sample
        c.pass = c.worst_slack <= 1e-9;
        report.all_pass = report.all_pass && c.pass;
    }
    return report;
}

// ---------------------------------------------------------------------------
// check_convexity

ConvexityReport check_convexity(const MFGModel& model, double t, const double* x,
                                const DiscreteMeasure& mu, const ConvexityOptions& opts) {
    const int na = model.controls.count();
    const int d = model.dim;
    const int pdim = d + d * d;  // stacked (b, sigma sigma^T)

    // Image of the atom set under (b, sigma sigma^T, f).
    std::vector<double> pts(static_cast<std::size_t>(na) * pdim);
    std::vector<double> fs(na);
    for (int i = 0; i < na; ++i) {
        double* p = pts.data() + static_cast<std::size_t>(i) * pdim;
        model.drift(t, x, mu, model.controls.atom(i), p);
        model.diffusion_matrix(t, x, mu, model.controls.atom(i), p + d);
        fs[i] = model.running_reward(t, x, mu, model.controls.atom(i));
    }
    auto pdist = [&](int i, int j) {
        double s = 0.0;
        const double* pi = pts.data() + static_cast<std::size_t>(i) * pdim;
        const double* pj = pts.data() + static_cast<std::size_t>(j) * pdim;
        for (int k = 0; k < pdim; ++k) s += (pi[k] - pj[k]) * (pi[k] - pj[k]);
        return std::sqrt(s);
    };

    // Default tolerances from the resolution of the atom image: a combined
    // point is deemed representable when it lies within half the coarsest
    // nearest-neighbor gap of some atom image.
    double rho_max = 0.0;
    double lip_f = 0.0;
    for (int i = 0; i < na; ++i) {
        double nn = std::numeric_limits<double>::infinity();
        int nn_j = -1;
        for (int j = 0; j < na; ++j)
            if (j != i) {
                const double dd = pdist(i, j);
                if (dd < nn) { nn = dd; nn_j = j; }
            }
        if (nn_j >= 0 && std::isfinite(nn)) {
            rho_max = std::max(rho_max, nn);
            if (nn > 1e-14) lip_f = std::max(lip_f, std::abs(fs[i] - fs[nn_j]) / nn);
        }
    }
    const double tol_match = opts.tol_match.value_or(std::max(0.5 * rho_max, 1e-12));
    const double tol_f = opts.tol_f.value_or(2.0 * lip_f * tol_match + 1e-9);

    ConvexityReport rep;
    rep.tol_match = tol_match;
    rep.tol_f = tol_f;
    rep.worst_f_gap = std::numeric_limits<double>::infinity();

    std::mt19937_64 rng(opts.seed);
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> w(na);

    auto eval_combo = [&](std::span<const double> weights) {
        std::vector<double> target(pdim, 0.0);
        double fbar = 0.0;
        for (int i = 0; i < na; ++i) {
            if (weights[i] == 0.0) continue;
            const double* p = pts.data() + static_cast<std::size_t>(i) * pdim;
            for (int k = 0; k < pdim; ++k) target[k] += weights[i] * p[k];
            fbar += weights[i] * fs[i];
        }
        // Best match: smallest (b, sigma sigma^T) distance, ties broken by larger f.
        int best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (int i = 0; i < na; ++i) {
            double s = 0.0;
            const double* p = pts.data() + static_cast<std::size_t>(i) * pdim;
            for (int k = 0; k < pdim; ++k) s += (p[k] - target[k]) * (p[k] - target[k]);
            s = std::sqrt(s);
            if (s < best_dist - 1e-15 || (std::abs(s - best_dist) <= 1e-15 && fs[i] > fs[best])) {
                best_dist = s;
                best = i;
            }
        }
        rep.worst_match_err = std::max(rep.worst_match_err, best_dist);
        rep.worst_f_gap = std::min(rep.worst_f_gap, fs[best] - fbar);
        ++rep.draws;
    };

    for (const auto& combo : opts.combinations) {
        if (static_cast<int>(combo.size()) != na)
            throw std::invalid_argument("check_convexity: combination size must match atom count");
        eval_combo(combo);
    }
    for (int it = 0; it < opts.draws; ++it) {
        double tot = 0.0;
        for (int i = 0; i < na; ++i) tot += (w[i] = expo(rng));
        for (int i = 0; i < na; ++i) w[i] /= tot;
        eval_combo(w);
    }

    if (rep.draws == 0) {
        rep.status = ConvexityStatus::Inconclusive;
        rep.worst_f_gap = 0.0;
        return rep;
    }
    const bool match_fail = rep.worst_match_err > 2.0 * tol_match;
    const bool match_edge = rep.worst_match_err > tol_match;
    const bool f_fail = rep.worst_f_gap < -2.0 * tol_f;
    const bool f_edge = rep.worst_f_gap < -tol_f;
    if (match_fail || f_fail) rep.status = ConvexityStatus::Fail;
    else if (match_edge || f_edge) rep.status = ConvexityStatus::Inconclusive;
    else rep.status = ConvexityStatus::Pass;
    return rep;
}

// ---------------------------------------------------------------------------
// Builtin families

DiscreteMeasure discretize_gaussian_1d(const StateLattice& lattice, double mean, double var) {
    if (lattice.dimension() != 1)
        throw std::invalid_argument("discretize_gaussian_1d: lattice must be 1-d");
    if (var == 0.0) {
        double pt;
        const int idx = lattice.nearest(&mean);
        pt = lattice.coord(0, idx);
        return DiscreteMeasure::dirac1d(pt);
    }
    const double sd = std::sqrt(var);
    const int n = lattice.size();
    const double h = lattice.cell_width(0);
    auto cdf = [&](double z) { return 0.5 * std::erfc(-(z - mean) / (sd * std::sqrt(2.0))); };
    std::vector<double> coords(n), masses(n);
    for (int i = 0; i < n; ++i) {
        const double xi = lattice.coord(0, i);
        const double lo = i == 0 ? -std::numeric_limits<double>::infinity() : xi - 0.5 * h;
        const double hi = i == n - 1 ? std::numeric_limits<double>::infinity() : xi + 0.5 * h;
        coords[i] = xi;
        masses[i] = (i == n - 1 ? 1.0 : cdf(hi)) - (i == 0 ? 0.0 : cdf(lo));
    }
    return DiscreteMeasure::normalized(1, std::move(coords), std::move(masses));
}

MFGModel lq_model(const lq::LQSpec& spec, const StateLattice& lattice, ControlSpace controls) {
    if (lattice.dimension() != 1) throw std::invalid_argument("lq_model: lattice must be 1-d");
    if (controls.dimension() != 1) throw std::invalid_argument("lq_model: controls must be scalar");
    const double c = spec.c;
    const double sigma0 = spec.sigma0;
    MFGModel m{
        .dim = 1,
        .noise_dim = 1,
        .horizon = spec.T,
        .initial_law = discretize_gaussian_1d(lattice, spec.mean0, spec.var0),
        .drift = [](double, const double*, const DiscreteMeasure&, const double* a, double* out) {
            out[0] = a[0];
        },
        .volatility = [sigma0](double, const double*, const DiscreteMeasure&, const double*, double* out) {
            out[0] = sigma0;
        },
        .running_reward = [](double, const double*, const DiscreteMeasure&, const double* a) {
            return -a[0] * a[0];
        },
        .terminal_reward = [c](const double* x, const DiscreteMeasure& mu) {
            const double z = x[0] + c * mu.mean();
            return -z * z;
        },
        .constants = GrowthConstants(1.0, 2.0 * std::max(1.0, c * c), 1.0,
                                     /*p=*/2.0, /*p_prime=*/2.0, /*p_sigma=*/0.0),
        .controls = std::move(controls),
        .drift_mu_free = true,
        .volatility_mu_free = true,
        .running_reward_mu_free = true,
        .terminal_reward_mu_free = false,
    };
    return m;
}

}  // namespace mfg
