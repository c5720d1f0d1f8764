// Batch front end: solve | best-response | lq-check | validate | wasserstein.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mfg/config.hpp"
#include "mfg/fixedpoint.hpp"
#include "mfg/lq.hpp"

namespace fs = std::filesystem;
using namespace mfg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNotConverged = 2;
constexpr int kExitBadConfig = 3;
constexpr int kExitCfl = 4;

void emit_error(const std::string& code, const std::string& detail) {
    nlohmann::json j;
    j["error"] = code;
    j["detail"] = detail;
    std::cerr << j.dump() << '\n';
}

void write_trace(const fs::path& file, const SolveReport& report) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    os << "iter,flow_residual,exploitability,value,mean_T\n";
    for (std::size_t i = 0; i < report.iterates.size(); ++i) {
        const IterateRecord& r = report.iterates[i];
        os << i << ',' << format17(r.flow_residual) << ',' << format17(r.exploitability) << ','
           << format17(r.value) << ',' << format17(r.mean_T) << '\n';
    }
}

void write_summary(const fs::path& file, const SolveReport& report) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    os << "status " << to_string(report.status) << '\n';
    os << "iterations " << report.iterations() << '\n';
    os << "value " << format17(report.final_value) << '\n';
    os << "mean_T " << format17(report.final_flow.marginals.back().mean()) << '\n';
    os << "flow_residual " << format17(report.final_residual) << '\n';
    os << "exploitability " << format17(report.final_exploitability) << '\n';
    os << "tol_J " << format17(report.tol_J) << '\n';
    os << "boundary_mass " << format17(report.boundary_mass) << '\n';
    os << "reentry_ok " << (report.reentry_ok ? 1 : 0) << '\n';
    os << "reentry_residual " << format17(report.reentry_residual) << '\n';
    os << "strictify_gate " << (report.strictify_gate ? 1 : 0) << '\n';
    if (report.strict_policy) {
        const GapReport& gap = *report.strict_gap;
        os << "strict_drift_mismatch " << format17(gap.max_drift_mismatch) << '\n';
        os << "strict_diffusion_mismatch " << format17(gap.max_diffusion_mismatch) << '\n';
        os << "strict_f_surplus " << format17(gap.min_f_surplus) << '\n';
        os << "strict_value_loss_bound " << format17(gap.value_loss_bound) << '\n';
        os << "strict_flow_distance " << format17(report.strict_flow_distance) << '\n';
        os << "strict_constraint_ok " << (gap.constraint_ok ? 1 : 0) << '\n';
    }
}

void write_relaxed_policy(const fs::path& file, const RelaxedPolicy& q, const StateLattice& lattice,
                          const ControlSpace& controls) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    os << "time_index";
    for (int k = 0; k < lattice.dimension(); ++k) os << ",x" << k;
    for (int k = 0; k < controls.dimension(); ++k) os << ",a" << k;
    os << ",weight\n";
    double pt[2];
    for (int t = 0; t < q.N; ++t)
        for (int x = 0; x < q.X; ++x) {
            lattice.point(x, pt);
            const double* w = q.row(t, x);
            for (int a = 0; a < q.A; ++a) {
                if (w[a] == 0.0) continue;
                os << t;
                for (int k = 0; k < lattice.dimension(); ++k) os << ',' << format17(pt[k]);
                for (int k = 0; k < controls.dimension(); ++k)
                    os << ',' << format17(controls.atom(a)[k]);
                os << ',' << format17(w[a]) << '\n';
            }
        }
}

void write_strict_policy(const fs::path& file, const StrictPolicy& pi, const StateLattice& lattice,
                         const ControlSpace& controls) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    os << "time_index";
    for (int k = 0; k < lattice.dimension(); ++k) os << ",x" << k;
    for (int k = 0; k < controls.dimension(); ++k) os << ",a" << k;
    os << '\n';
    double pt[2];
    for (int t = 0; t < pi.N; ++t)
        for (int x = 0; x < pi.X; ++x) {
            lattice.point(x, pt);
            os << t;
            for (int k = 0; k < lattice.dimension(); ++k) os << ',' << format17(pt[k]);
            for (int k = 0; k < controls.dimension(); ++k)
                os << ',' << format17(controls.atom(pi.at(t, x))[k]);
            os << '\n';
        }
}

int run_solve(const fs::path& config_path) {
    RunConfig config = load_run_config(config_path);
    const MFGModel model = build_model(config);
    fs::create_directories(config.out_dir);
    {
        std::ofstream os(config.out_dir / "resolved_config.json");
        os << config.resolved.dump(2) << '\n';
    }
    const SolveReport report = iterate(model, config.lattice, config.timegrid, config.solver);
    write_trace(config.out_dir / "trace.csv", report);
    write_summary(config.out_dir / "summary.txt", report);
    save_flow(config.out_dir / "flow.csv", report.final_flow);
    write_relaxed_policy(config.out_dir / "policy.csv", report.final_policy, config.lattice,
                         model.controls);
    if (report.strict_policy)
        write_strict_policy(config.out_dir / "strict_policy.csv", *report.strict_policy,
                            config.lattice, model.controls);
    std::cout << "status " << to_string(report.status) << "  iterations " << report.iterations()
              << "  value " << format17(report.final_value) << "  mean_T "
              << format17(report.final_flow.marginals.back().mean()) << '\n';
    if (report.status != SolveStatus::Converged) {
        emit_error("not_converged", to_string(report.status));
        return kExitNotConverged;
    }
    return kExitOk;
}

int run_best_response(const fs::path& config_path, const fs::path& flow_path, fs::path out_dir) {
    RunConfig config = load_run_config(config_path);
    const MFGModel model = build_model(config);
    const MeasureFlow muflow = load_flow(flow_path);
    const TransitionKernel kernel =
        build_kernel(model, muflow, config.lattice, config.timegrid, config.solver.threads);
    const BestResponse br =
        best_response(model, muflow, kernel, config.solver.method, config.solver.threads);
    if (out_dir.empty()) out_dir = config.out_dir;
    fs::create_directories(out_dir);
    save_flow(out_dir / "br_flow.csv", br.flow);
    {
        std::ofstream os(out_dir / "br_summary.txt");
        os << "value " << format17(br.value) << '\n';
        os << "mean_T " << format17(br.flow.marginals.back().mean()) << '\n';
    }
    std::cout << "value " << format17(br.value) << "  mean_T "
              << format17(br.flow.marginals.back().mean()) << '\n';
    return kExitOk;
}

int run_lq_check(const fs::path& config_path) {
    RunConfig config = load_run_config(config_path);
    if (config.family != "lq") {
        emit_error("invalid_config", "lq-check requires model.family = lq");
        return kExitBadConfig;
    }
    const nlohmann::json& m = config.model_json;
    const lq::LQSpec spec(m["T"].get<double>(), m["c"].get<double>(), m.value("sigma0", 0.0),
                          m.value("mean0", 0.0), m.value("var0", 0.0));
    const MFGModel model = build_model(config);

    std::cout << "critical_c " << format17(lq::critical_c(spec.T)) << '\n';
    const auto analytic = lq::analytic_mean_T(spec);
    std::cout << "analytic_mean_T "
              << (analytic ? format17(*analytic) : std::string("NO_SOLUTION")) << '\n';

    const SolveReport report = iterate(model, config.lattice, config.timegrid, config.solver);
    std::cout << "solver_status " << to_string(report.status) << '\n';
    std::cout << "solved_mean_T " << format17(report.final_flow.marginals.back().mean()) << '\n';
    std::cout << "solved_value " << format17(report.final_value) << '\n';
    if (analytic)
        std::cout << "mean_T_abs_error "
                  << format17(std::abs(report.final_flow.marginals.back().mean() - *analytic))
                  << '\n';
    return report.status == SolveStatus::Converged ? kExitOk : kExitNotConverged;
}

int run_validate(const fs::path& config_path) {
    RunConfig config = load_run_config(config_path);
    const MFGModel model = build_model(config);
    const auto samples = default_sample_cloud(config, model, model.initial_law);
    const ValidationReport report = validate_growth(model, samples);
    for (const auto& check : report.checks)
        std::cout << "check " << check.name << "  worst_slack " << format17(check.worst_slack)
                  << "  " << (check.pass ? "PASS" : "FAIL") << '\n';
    if (!report.p_prime_gt_p)
        std::cout << "note: the assumption p' > p is violated (p'="
                  << format17(model.constants.p_prime) << ", p=" << format17(model.constants.p)
                  << ")\n";
    double x0[2] = {0.0, 0.0};
    std::array<double, 2> mean_pt{model.initial_law.mean(0),
                                  model.dim == 2 ? model.initial_law.mean(1) : 0.0};
    config.lattice.point(config.lattice.nearest(mean_pt.data()), x0);
    const ConvexityReport conv = check_convexity(model, 0.0, x0, model.initial_law);
    const char* status = conv.status == ConvexityStatus::Pass
                             ? "PASS"
                             : (conv.status == ConvexityStatus::Fail ? "FAIL" : "INCONCLUSIVE");
    std::cout << "convexity " << status << "  worst_match_err " << format17(conv.worst_match_err)
              << "  worst_f_gap " << format17(conv.worst_f_gap) << '\n';
    std::cout << (report.all_pass ? "growth_checks_pass" : "growth_checks_fail") << '\n';
    return kExitOk;
}

int run_wasserstein(const fs::path& file_a, const fs::path& file_b, double p) {
    const DiscreteMeasure a = load_measure(file_a);
    const DiscreteMeasure b = load_measure(file_b);
    std::cout << format17(wasserstein(a, b, p)) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean field game solver: relaxed Markovian equilibria on discretized measure flows"};
    app.require_subcommand(1);

    std::string config_path, flow_path, out_dir, file_a, file_b;
    double wp = 1.0;

    CLI::App* solve = app.add_subcommand("solve", "Run the damped fixed-point solve");
    solve->add_option("config", config_path, "JSON run config")->required();

    CLI::App* br = app.add_subcommand("best-response", "One best-response application to a flow file");
    br->add_option("config", config_path, "JSON run config")->required();
    br->add_option("--flow", flow_path, "input measure-flow file")->required();
    br->add_option("--out", out_dir, "output directory (default: config output.dir)");

    CLI::App* lqc = app.add_subcommand("lq-check", "Analytic linear-quadratic values vs solver output");
    lqc->add_option("config", config_path, "JSON run config (lq family)")->required();

    CLI::App* val = app.add_subcommand("validate", "Growth and convexity assumption checks");
    val->add_option("config", config_path, "JSON run config")->required();

    CLI::App* was = app.add_subcommand("wasserstein", "Distance between two measure dump files");
    was->add_option("fileA", file_a, "first measure file")->required();
    was->add_option("fileB", file_b, "second measure file")->required();
    was->add_option("--p", wp, "Wasserstein order (default 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        if (rc != 0) {
            emit_error("invalid_arguments", e.get_name());
            return kExitBadConfig;
        }
        return kExitOk;  // --help and friends
    }

    try {
        if (solve->parsed()) return run_solve(config_path);
        if (br->parsed()) return run_best_response(config_path, flow_path, out_dir);
        if (lqc->parsed()) return run_lq_check(config_path);
        if (val->parsed()) return run_validate(config_path);
        if (was->parsed()) return run_wasserstein(file_a, file_b, wp);
    } catch (const ConfigError& e) {
        emit_error("invalid_config", e.what());
        return kExitBadConfig;
    } catch (const CflError& e) {
        emit_error("cfl_violation", e.what());
        return kExitCfl;
    } catch (const std::exception& e) {
        emit_error("invalid_config", e.what());
        return kExitBadConfig;
    }
    emit_error("unknown_subcommand", "no subcommand selected");
    return kExitBadConfig;
}
