// End-to-end checks of the batch front end: exit codes, output files,
// byte-level determinism.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return MFG_CLI_PATH; }

int run(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string capture(const std::string& args) {
    const fs::path tmp = fs::temp_directory_path() / "mfg_cli_capture.txt";
    const std::string cmd = std::string(cli_path()) + " " + args + " >" + tmp.string() + " 2>&1";
    (void)!std::system(cmd.c_str());
    return slurp(tmp);
}

fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path dir = fs::temp_directory_path() / "mfg_cli_tests";
    fs::create_directories(dir);
    const fs::path file = dir / name;
    std::ofstream(file) << body;
    return file;
}

std::string lq_config(double c, int max_iter, const std::string& out, int threads = 1,
                      double tol = 1e-3) {
    std::ostringstream ss;
    ss << R"({
  "model": {"family": "lq", "T": 1.0, "c": )" << c
       << R"(, "sigma0": 0.1, "mean0": 1.0, "var0": 0.04},
  "lattice": {"lower": -1.0, "upper": 3.0, "h": 0.1},
  "time": {"N": 25},
  "control": {"lower": -2.0, "upper": 2.0, "count": 11},
  "solver": {"damping": "fictitious-play", "tol": )" << tol
       << R"(, "max_iter": )" << max_iter << R"(, "method": "dp", "seed": 9, "threads": )" << threads
       << R"(},
  "output": {"dir": ")" << out << R"("}
})";
    return ss.str();
}

}  // namespace

TEST_CASE("solve: converged run exits 0 and writes the full output set") {
    const fs::path out = fs::temp_directory_path() / "mfg_cli_tests" / "solve_ok";
    fs::remove_all(out);
    const auto cfg = write_config("ok.json", lq_config(1.0, 2000, out.string()));
    CHECK(run("solve " + cfg.string()) == 0);
    for (const char* f : {"trace.csv", "summary.txt", "flow.csv", "policy.csv",
                          "strict_policy.csv", "resolved_config.json"})
        CHECK(fs::exists(out / f));
    const std::string summary = slurp(out / "summary.txt");
    CHECK(summary.find("status CONVERGED") != std::string::npos);
    const std::string trace = slurp(out / "trace.csv");
    CHECK(trace.rfind("iter,flow_residual,exploitability,value,mean_T", 0) == 0);
}

TEST_CASE("solve: critical coupling exits 2") {
    const fs::path out = fs::temp_directory_path() / "mfg_cli_tests" / "solve_crit";
    const auto cfg = write_config("crit.json", lq_config(-2.0, 120, out.string()));
    CHECK(run("solve " + cfg.string()) == 2);
}

TEST_CASE("invalid configs exit 3 with a machine-readable reason") {
    const auto missing = write_config("missing.json", R"({"model": {"family": "lq", "T": 1.0, "c": 0.0}})");
    CHECK(run("solve " + missing.string()) == 3);
    const auto junk = write_config("junk.json", "this is not json");
    CHECK(run("solve " + junk.string()) == 3);
    const auto badfam = write_config("fam.json",
                                     R"({"model": {"family": "nope", "T": 1}, "lattice": {"lower": 0, "upper": 1, "h": 0.5},
                                         "time": {"N": 2}, "control": {"atoms": [0.0]}})");
    CHECK(run("solve " + badfam.string()) == 3);
    CHECK(run("frobnicate") == 3);

    const fs::path tmp = fs::temp_directory_path() / "mfg_cli_err.txt";
    (void)!std::system((std::string(cli_path()) + " solve " + missing.string() + " 2>" + tmp.string() +
                        " >/dev/null")
                           .c_str());
    const std::string err = slurp(tmp);
    CHECK(err.find("\"error\"") != std::string::npos);
    CHECK(err.find('\n') == err.size() - 1);  // exactly one line
}

TEST_CASE("CFL violations exit 4") {
    std::string cfg_body = lq_config(1.0, 100, (fs::temp_directory_path() / "x").string());
    // N = 25 -> dt = 0.04 > h^2/(sigma^2 + 2h) = 0.01/0.21 at h = 0.1; use h = 0.05
    const std::string bad = R"({
  "model": {"family": "lq", "T": 1.0, "c": 1.0, "sigma0": 0.5, "mean0": 1.0, "var0": 0.04},
  "lattice": {"lower": -1.0, "upper": 3.0, "h": 0.05},
  "time": {"N": 25},
  "control": {"lower": -2.0, "upper": 2.0, "count": 11},
  "solver": {"tol": 1e-3, "max_iter": 10},
  "output": {"dir": "/tmp/mfg_cli_cfl"}
})";
    const auto cfg = write_config("cfl.json", bad);
    CHECK(run("solve " + cfg.string()) == 4);
}

TEST_CASE("determinism: identical config and seed give byte-identical outputs") {
    const fs::path out1 = fs::temp_directory_path() / "mfg_cli_tests" / "det1";
    const fs::path out2 = fs::temp_directory_path() / "mfg_cli_tests" / "det2";
    const fs::path out3 = fs::temp_directory_path() / "mfg_cli_tests" / "det3";
    fs::remove_all(out1);
    fs::remove_all(out2);
    fs::remove_all(out3);
    const auto c1 = write_config("det1.json", lq_config(1.0, 2000, out1.string(), 1));
    const auto c2 = write_config("det2.json", lq_config(1.0, 2000, out2.string(), 1));
    const auto c3 = write_config("det3.json", lq_config(1.0, 2000, out3.string(), 3));
    REQUIRE(run("solve " + c1.string()) == 0);
    REQUIRE(run("solve " + c2.string()) == 0);
    REQUIRE(run("solve " + c3.string()) == 0);  // different thread count
    for (const char* f : {"trace.csv", "summary.txt", "flow.csv", "policy.csv"}) {
        CHECK(slurp(out1 / f) == slurp(out2 / f));
        CHECK(slurp(out1 / f) == slurp(out3 / f));
    }
}

TEST_CASE("wasserstein subcommand: identical files print 0 and exit 0") {
    const fs::path dir = fs::temp_directory_path() / "mfg_cli_tests";
    fs::create_directories(dir);
    {
        std::ofstream m(dir / "m.csv");
        m << "time_index,x0,mass\n-1,0,0.5\n-1,2,0.5\n";
    }
    CHECK(run("wasserstein " + (dir / "m.csv").string() + " " + (dir / "m.csv").string()) == 0);
    const std::string out =
        capture("wasserstein " + (dir / "m.csv").string() + " " + (dir / "m.csv").string());
    CHECK(std::stod(out) == 0.0);
    {
        std::ofstream m(dir / "d1.csv");
        m << "time_index,x0,mass\n-1,1,1\n";
    }
    const std::string d = capture("wasserstein " + (dir / "m.csv").string() + " " +
                                  (dir / "d1.csv").string() + " --p 1");
    CHECK(std::stod(d) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("validate reports the p' > p violation for the LQ family") {
    const auto cfg = write_config("val.json", lq_config(1.0, 10, "/tmp/mfg_val_out"));
    const std::string out = capture("validate " + cfg.string());
    CHECK(out.find("p' > p is violated") != std::string::npos);
    CHECK(out.find("growth_checks_pass") != std::string::npos);
    CHECK(out.find("convexity PASS") != std::string::npos);
}

TEST_CASE("validate: every shipped config passes the convexity check it declares") {
    const std::string shipped = MFG_CONFIG_DIR;
    int seen = 0;
    for (const auto& entry : fs::directory_iterator(shipped)) {
        if (entry.path().extension() != ".json") continue;
        ++seen;
        const std::string out = capture("validate " + entry.path().string());
        CHECK_MESSAGE(out.find("convexity PASS") != std::string::npos, entry.path().string());
        if (entry.path().filename() == "lq_demo.json")
            CHECK(out.find("p' > p is violated") != std::string::npos);
    }
    CHECK(seen >= 3);
}

TEST_CASE("best-response runs are byte-identical on a mu-independent model") {
    const fs::path dir = fs::temp_directory_path() / "mfg_cli_tests";
    const fs::path out = dir / "solve_for_flow";
    const auto cfg = write_config("br.json", lq_config(0.0, 2000, out.string()));
    REQUIRE(run("solve " + cfg.string()) == 0);

    const fs::path br1 = dir / "br1", br2 = dir / "br2";
    fs::remove_all(br1);
    fs::remove_all(br2);
    const std::string flow = (out / "flow.csv").string();
    REQUIRE(run("best-response " + cfg.string() + " --flow " + flow + " --out " + br1.string()) == 0);
    REQUIRE(run("best-response " + cfg.string() + " --flow " + flow + " --out " + br2.string()) == 0);
    CHECK(slurp(br1 / "br_flow.csv") == slurp(br2 / "br_flow.csv"));
    CHECK(slurp(br1 / "br_summary.txt") == slurp(br2 / "br_summary.txt"));
}

TEST_CASE("lq-check prints analytic values next to solver output") {
    const auto cfg = write_config("lqc.json", lq_config(1.0, 2000, "/tmp/mfg_lqc_out"));
    const std::string out = capture("lq-check " + cfg.string());
    CHECK(out.find("critical_c -2") != std::string::npos);
    CHECK(out.find("analytic_mean_T 0.333333") != std::string::npos);
    CHECK(out.find("solver_status CONVERGED") != std::string::npos);
    CHECK(out.find("solved_mean_T") != std::string::npos);

    const auto crit = write_config("lqc_crit.json", lq_config(-2.0, 50, "/tmp/mfg_lqc_crit"));
    const std::string out2 = capture("lq-check " + crit.string());
    CHECK(out2.find("analytic_mean_T NO_SOLUTION") != std::string::npos);
}
