#include "mfg/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace mfg {

using nlohmann::json;

std::string format17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

double need_number(const json& j, const std::string& section, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number()) fail(section + "." + key + " must be a number");
    return j[key].get<double>();
}

double get_number(const json& j, const std::string& section, const std::string& key, double dflt) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number()) fail(section + "." + key + " must be a number");
    return j[key].get<double>();
}

long get_integer(const json& j, const std::string& section, const std::string& key, long dflt) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number_integer()) fail(section + "." + key + " must be an integer");
    return j[key].get<long>();
}

StateLattice parse_lattice(const json& j) {
    if (!j.is_object()) fail("lattice section missing");
    auto axis_values = [&](const char* key) -> std::vector<double> {
        if (!j.contains(key)) fail(std::string("lattice.") + key + " missing");
        if (j[key].is_number()) return {j[key].get<double>()};
        if (j[key].is_array()) {
            std::vector<double> out;
            for (const auto& v : j[key]) {
                if (!v.is_number()) fail(std::string("lattice.") + key + " entries must be numbers");
                out.push_back(v.get<double>());
            }
            return out;
        }
        fail(std::string("lattice.") + key + " must be a number or array");
    };
    const auto lower = axis_values("lower");
    const auto upper = axis_values("upper");
    const auto h = axis_values("h");
    if (lower.size() != upper.size() || lower.size() != h.size())
        fail("lattice.lower/upper/h must have matching lengths");
    std::vector<StateLattice::Axis> axes;
    for (std::size_t k = 0; k < lower.size(); ++k)
        axes.push_back(StateLattice::Axis{lower[k], upper[k], h[k]});
    try {
        return StateLattice(std::move(axes));
    } catch (const std::invalid_argument& e) {
        fail(std::string("lattice: ") + e.what());
    }
}

ControlSpace parse_controls(const json& j, bool convex_hint) {
    if (!j.is_object()) fail("control section missing");
    try {
        if (j.contains("atoms")) {
            if (!j["atoms"].is_array() || j["atoms"].empty()) fail("control.atoms must be a nonempty array");
            std::vector<double> atoms;
            int dim = 1;
            if (j["atoms"].front().is_array()) {
                dim = static_cast<int>(j["atoms"].front().size());
                for (const auto& a : j["atoms"]) {
                    if (!a.is_array() || static_cast<int>(a.size()) != dim)
                        fail("control.atoms rows must share one dimension");
                    for (const auto& v : a) atoms.push_back(v.get<double>());
                }
            } else {
                for (const auto& a : j["atoms"]) {
                    if (!a.is_number()) fail("control.atoms must hold numbers");
                    atoms.push_back(a.get<double>());
                }
            }
            double bound = 0.0;
            for (std::size_t i = 0; i < atoms.size() / dim; ++i) {
                double s = 0.0;
                for (int k = 0; k < dim; ++k) s += atoms[i * dim + k] * atoms[i * dim + k];
                bound = std::max(bound, std::sqrt(s));
            }
            bound = get_number(j, "control", "bound", bound);
            return ControlSpace(dim, std::move(atoms), bound, convex_hint);
        }
        const double lo = need_number(j, "control", "lower");
        const double hi = need_number(j, "control", "upper");
        const long count = get_integer(j, "control", "count", 0);
        if (count < 1) fail("control.count must be a positive integer");
        return ControlSpace::uniform_1d(lo, hi, static_cast<int>(count), convex_hint);
    } catch (const std::invalid_argument& e) {
        fail(std::string("control: ") + e.what());
    }
}

SolveConfig parse_solver(const json& j) {
    SolveConfig cfg;
    if (j.is_null()) return cfg;
    if (!j.is_object()) fail("solver section must be an object");
    const std::string damping = j.value("damping", std::string("fictitious-play"));
    if (damping == "fictitious-play" || damping == "fp") {
        cfg.damping = SolveConfig::Damping::FictitiousPlay;
    } else if (damping == "constant") {
        cfg.damping = SolveConfig::Damping::Constant;
        cfg.omega = get_number(j, "solver", "omega", 0.5);
    } else {
        fail("solver.damping must be 'fictitious-play' or 'constant'");
    }
    cfg.tol = get_number(j, "solver", "tol", 1e-4);
    cfg.max_iter = static_cast<int>(get_integer(j, "solver", "max_iter", 1000));
    const std::string method = j.value("method", std::string("dp"));
    if (method == "dp") cfg.method = SolveConfig::Method::Dp;
    else if (method == "lp") cfg.method = SolveConfig::Method::Lp;
    else fail("solver.method must be 'dp' or 'lp'");
    cfg.p = get_number(j, "solver", "p", 1.0);
    cfg.seed = static_cast<std::uint64_t>(get_integer(j, "solver", "seed", 0));
    cfg.threads = static_cast<int>(get_integer(j, "solver", "threads", 1));
    if (j.contains("strictify")) {
        if (!j["strictify"].is_boolean()) fail("solver.strictify must be a boolean");
        cfg.strictify_on_convergence = j["strictify"].get<bool>();
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        fail(std::string("solver: ") + e.what());
    }
    return cfg;
}

json resolved_solver(const SolveConfig& cfg) {
    json j;
    j["damping"] = cfg.damping == SolveConfig::Damping::FictitiousPlay ? "fictitious-play" : "constant";
    if (cfg.damping == SolveConfig::Damping::Constant) j["omega"] = cfg.omega;
    j["tol"] = cfg.tol;
    j["max_iter"] = cfg.max_iter;
    j["method"] = cfg.method == SolveConfig::Method::Dp ? "dp" : "lp";
    j["p"] = cfg.p;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["strictify"] = cfg.strictify_on_convergence;
    return j;
}

// ---------------------------------------------------------------------------
// custom-table family

enum class MuFunctional { None, Mean, SecondMoment, CdfAtX };

MuFunctional parse_functional(const json& coef, const std::string& name) {
    const std::string f = coef.value("mu", std::string("none"));
    if (f == "none") return MuFunctional::None;
    if (f == "mean") return MuFunctional::Mean;
    if (f == "second-moment") return MuFunctional::SecondMoment;
    if (f == "cdf-at-x") return MuFunctional::CdfAtX;
    fail("model." + name + ".mu must be one of none|mean|second-moment|cdf-at-x");
}

double eval_functional(MuFunctional f, const DiscreteMeasure& mu, double x) {
    switch (f) {
        case MuFunctional::None: return 0.0;
        case MuFunctional::Mean: return mu.mean(0);
        case MuFunctional::SecondMoment: return moment(mu, 2.0);
        case MuFunctional::CdfAtX: {
            double c = 0.0;
            for (std::size_t i = 0; i < mu.size(); ++i) {
                if (mu.coord(i, 0) > x) break;  // atoms sorted by coordinate
                c += mu.mass(i);
            }
            return c;
        }
    }
    return 0.0;
}

struct CoefficientTable {
    std::vector<double> values;
    MuFunctional functional = MuFunctional::None;
    double scale = 0.0;
    std::vector<double> mu_weights;  // optional per-entry factor on the functional
};

struct TableModelData {
    int N = 0, X = 0, A = 0;
    double dt = 0.0;
    StateLattice lattice;
    std::vector<double> atoms;  // scalar controls
    CoefficientTable b, sigma, f, g;

    explicit TableModelData(const StateLattice& l) : lattice(l) {}

    int time_index(double t) const {
        int i = static_cast<int>(std::llround(t / dt));
        return std::clamp(i, 0, N - 1);
    }
    int atom_index(const double* a) const {
        int best = 0;
        double bd = std::abs(atoms[0] - a[0]);
        for (int i = 1; i < A; ++i) {
            const double d = std::abs(atoms[i] - a[0]);
            if (d < bd) { bd = d; best = i; }
        }
        return best;
    }
    double lookup(const CoefficientTable& c, double t, const double* x, const DiscreteMeasure& mu,
                  const double* a) const {
        const int ti = time_index(t);
        const int xi = lattice.nearest(x);
        const int ai = atom_index(a);
        const std::size_t idx = (static_cast<std::size_t>(ti) * X + xi) * A + ai;
        double v = c.values[idx];
        if (c.functional != MuFunctional::None) {
            const double F = eval_functional(c.functional, mu, x[0]);
            v += (c.scale + (c.mu_weights.empty() ? 0.0 : c.mu_weights[idx])) * F;
        }
        return v;
    }
    double lookup_terminal(const double* x, const DiscreteMeasure& mu) const {
        const int xi = lattice.nearest(x);
        double v = g.values[xi];
        if (g.functional != MuFunctional::None) {
            const double F = eval_functional(g.functional, mu, x[0]);
            v += (g.scale + (g.mu_weights.empty() ? 0.0 : g.mu_weights[xi])) * F;
        }
        return v;
    }
};

CoefficientTable parse_coefficient(const json& model, const std::string& name, std::size_t expected) {
    if (!model.contains(name) || !model[name].is_object())
        fail("model." + name + " section missing for custom-table family");
    const json& coef = model[name];
    CoefficientTable out;
    if (!coef.contains("table") || !coef["table"].is_array())
        fail("model." + name + ".table must be an array");
    for (const auto& v : coef["table"]) {
        if (!v.is_number()) fail("model." + name + ".table must hold numbers");
        out.values.push_back(v.get<double>());
    }
    if (out.values.size() != expected)
        fail("model." + name + ".table has " + std::to_string(out.values.size()) + " entries, expected " +
             std::to_string(expected));
    out.functional = parse_functional(coef, name);
    out.scale = get_number(coef, "model." + name, "mu_scale", out.functional == MuFunctional::None ? 0.0 : 1.0);
    if (coef.contains("mu_table")) {
        if (!coef["mu_table"].is_array()) fail("model." + name + ".mu_table must be an array");
        for (const auto& v : coef["mu_table"]) out.mu_weights.push_back(v.get<double>());
        if (out.mu_weights.size() != expected)
            fail("model." + name + ".mu_table must match the table shape");
        if (out.functional == MuFunctional::None)
            fail("model." + name + ".mu_table needs a declared mu functional");
    }
    return out;
}

DiscreteMeasure parse_initial(const json& model, const StateLattice& lattice) {
    if (!model.contains("initial")) fail("model.initial missing");
    const json& init = model["initial"];
    if (init.contains("atoms")) {
        std::vector<double> coords, masses;
        for (const auto& row : init["atoms"]) {
            if (!row.is_array() || row.size() != 2) fail("model.initial.atoms rows must be [x, mass]");
            coords.push_back(row[0].get<double>());
            masses.push_back(row[1].get<double>());
        }
        try {
            return DiscreteMeasure(1, std::move(coords), std::move(masses));
        } catch (const std::invalid_argument& e) {
            fail(std::string("model.initial: ") + e.what());
        }
    }
    const double mean = need_number(init, "model.initial", "mean");
    const double var = need_number(init, "model.initial", "var");
    if (var < 0.0) fail("model.initial.var must be >= 0");
    return discretize_gaussian_1d(lattice, mean, var);
}

MFGModel build_table_model(const RunConfig& config) {
    if (config.lattice.dimension() != 1 || config.controls.dimension() != 1)
        fail("custom-table family supports d = 1 with scalar controls");
    const json& model = config.model_json;
    const int N = config.timegrid.N, X = config.lattice.size(), A = config.controls.count();
    auto data = std::make_shared<TableModelData>(config.lattice);
    data->N = N;
    data->X = X;
    data->A = A;
    data->dt = config.timegrid.dt();
    data->atoms.assign(config.controls.atoms_flat().begin(), config.controls.atoms_flat().end());
    const std::size_t nxa = static_cast<std::size_t>(N) * X * A;
    data->b = parse_coefficient(model, "b", nxa);
    data->sigma = parse_coefficient(model, "sigma", nxa);
    data->f = parse_coefficient(model, "f", nxa);
    data->g = parse_coefficient(model, "g", static_cast<std::size_t>(X));

    const json& constants = model.contains("constants") ? model["constants"] : json::object();
    GrowthConstants gc;
    try {
        gc = GrowthConstants(get_number(constants, "constants", "c1", 1.0),
                             get_number(constants, "constants", "c2", 1.0),
                             get_number(constants, "constants", "c3", 1.0),
                             get_number(constants, "constants", "p", 1.0),
                             get_number(constants, "constants", "p_prime", 2.0),
                             get_number(constants, "constants", "p_sigma", 0.0));
    } catch (const std::invalid_argument& e) {
        fail(std::string("model.constants: ") + e.what());
    }

    const bool b_mu_free = data->b.functional == MuFunctional::None;
    const bool s_mu_free = data->sigma.functional == MuFunctional::None;
    const bool f_mu_free = data->f.functional == MuFunctional::None;
    const bool g_mu_free = data->g.functional == MuFunctional::None;
    return MFGModel{
        .dim = 1,
        .noise_dim = 1,
        .horizon = config.timegrid.T,
        .initial_law = parse_initial(model, config.lattice),
        .drift = [data](double t, const double* x, const DiscreteMeasure& mu, const double* a, double* out) {
            out[0] = data->lookup(data->b, t, x, mu, a);
        },
        .volatility = [data](double t, const double* x, const DiscreteMeasure& mu, const double* a, double* out) {
            out[0] = data->lookup(data->sigma, t, x, mu, a);
        },
        .running_reward = [data](double t, const double* x, const DiscreteMeasure& mu, const double* a) {
            return data->lookup(data->f, t, x, mu, a);
        },
        .terminal_reward = [data](const double* x, const DiscreteMeasure& mu) {
            return data->lookup_terminal(x, mu);
        },
        .constants = gc,
        .controls = config.controls,
        .drift_mu_free = b_mu_free,
        .volatility_mu_free = s_mu_free,
        .running_reward_mu_free = f_mu_free,
        .terminal_reward_mu_free = g_mu_free,
    };
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    if (!j.is_object()) fail("config root must be a JSON object");
    for (const char* section : {"model", "lattice", "time"})
        if (!j.contains(section)) fail(std::string(section) + " section missing");

    const json& model = j["model"];
    if (!model.is_object() || !model.contains("family") || !model["family"].is_string())
        fail("model.family must name a builtin family (lq | custom-table)");
    const std::string family = model["family"].get<std::string>();
    if (family != "lq" && family != "custom-table")
        fail("unknown model.family '" + family + "' (expected lq | custom-table)");

    StateLattice lattice = parse_lattice(j["lattice"]);
    const long N = get_integer(j["time"], "time", "N", 0);
    if (N < 1) fail("time.N must be a positive integer");
    double T;
    if (family == "lq") T = need_number(model, "model", "T");
    else T = need_number(model, "model", "T");
    if (!(T > 0.0)) fail("model.T must be positive");

    const bool convex_hint = model.value("convex_hint", family == "lq");
    if (!j.contains("control")) fail("control section missing");
    ControlSpace controls = parse_controls(j["control"], convex_hint);

    RunConfig config(std::move(lattice), TimeGrid(T, static_cast<int>(N)), std::move(controls));
    config.family = family;
    config.model_json = model;
    config.solver = parse_solver(j.contains("solver") ? j["solver"] : json());
    config.out_dir = j.contains("output") && j["output"].contains("dir")
                         ? std::filesystem::path(j["output"]["dir"].get<std::string>())
                         : std::filesystem::path("out");

    if (family == "lq") {
        // Validate the LQ parameters eagerly so config errors surface as such.
        need_number(model, "model", "c");
        if (get_number(model, "model", "sigma0", 0.0) < 0.0) fail("model.sigma0 must be >= 0");
        if (get_number(model, "model", "var0", 0.0) < 0.0) fail("model.var0 must be >= 0");
        if (config.lattice.dimension() != 1) fail("lq family requires a 1-d lattice");
    }

    // Archive the resolved config.
    json resolved = j;
    resolved["solver"] = resolved_solver(config.solver);
    resolved["output"]["dir"] = config.out_dir.string();
    resolved["model"]["convex_hint"] = convex_hint;
    config.resolved = std::move(resolved);
    return config;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) fail("cannot open config file: " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        fail(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

MFGModel build_model(const RunConfig& config) {
    if (config.family == "lq") {
        const json& m = config.model_json;
        lq::LQSpec spec(m["T"].get<double>(), m["c"].get<double>(), m.value("sigma0", 0.0),
                        m.value("mean0", 0.0), m.value("var0", 0.0));
        return lq_model(spec, config.lattice, config.controls);
    }
    return build_table_model(config);
}

std::vector<GrowthSample> default_sample_cloud(const RunConfig& config, const MFGModel& model,
                                               const DiscreteMeasure& mu) {
    std::vector<GrowthSample> samples;
    const int X = config.lattice.size();
    const int A = model.controls.count();
    const int nx = std::min(7, X);
    const int na = std::min(5, A);
    for (double t : {0.0, 0.5 * config.timegrid.T, config.timegrid.T}) {
        for (int ai = 0; ai < na; ++ai) {
            const int a = ai * (A - 1) / std::max(1, na - 1);
            for (int xi = 0; xi < nx; ++xi) {
                const int node = xi * (X - 1) / std::max(1, nx - 1);
                GrowthSample s;
                s.t = t;
                config.lattice.point(node, s.x.data());
                s.mu = &mu;
                for (int k = 0; k < model.controls.dimension(); ++k)
                    s.a[k] = model.controls.atom(a)[k];
                samples.push_back(s);
            }
        }
    }
    return samples;
}

}  // namespace mfg
