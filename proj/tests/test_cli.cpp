#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

using namespace qlwave;
using namespace qlwave::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "qlwave_cli_test" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Runs the built tool; returns its exit status.
int tool(const std::string& command, const json& config, const fs::path& dir, const std::string& extra = "") {
    const fs::path cfg = dir.parent_path() / (dir.filename().string() + ".json");
    std::ofstream(cfg) << config.dump();
    const std::string cmd = std::string(QLWAVE_TOOL_PATH) + " " + command + " --config " + cfg.string() + " --out " +
                            dir.string() + " --quiet " + extra + " > " + (dir.string() + ".log") + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string log_of(const fs::path& dir) { return slurp(dir.string() + ".log"); }

json small_solve() {
    return {{"problem", {{"epsilon", 0.1}}}, {"solver", {{"dx", 1e-2}, {"t_max", 0.2}, {"snapshot_interval", 0.1}}}};
}

}  // namespace

TEST(Config, MinimalDocumentGetsDefaults) {
    const RunConfig c = load_config_text("{}");
    EXPECT_EQ(c.spec.p, 2.0);
    EXPECT_EQ(c.spec.A, 2.0);
    EXPECT_EQ(c.spec.epsilon, 0.05);
    EXPECT_EQ(c.spec.variant, Variant::SpaceDerivative);
    EXPECT_EQ(c.spec.data.sigma(), 1.0);
    EXPECT_EQ(c.sigma0, 0.5);
    EXPECT_EQ(c.solver.dx, 2e-3);
    EXPECT_EQ(c.solver.snapshot_interval, 0.05);
    EXPECT_EQ(c.experiment.source, scaling::Source::Oracle);
    EXPECT_EQ(c.experiment.slope_tolerance, 0.05);
    // the resolved document spells every default out
    EXPECT_EQ(c.resolved["problem"]["sigma0"], 0.5);
    EXPECT_EQ(c.resolved["solver"]["scheme"], "lax_wendroff");
    EXPECT_EQ(c.resolved["experiment"]["branch"], "f");
    EXPECT_EQ(c.resolved["problem"]["f"].size(), 1u);
}

TEST(Config, SolverSourceLoosensSlope) {
    EXPECT_EQ(load_config_text(R"({"experiment": {"source": "solver"}})").experiment.slope_tolerance, 0.1);
}

TEST(Config, UnknownKeyIsNamed) {
    try {
        (void)load_config_text(R"({"problem": {"epslion": 0.1}})");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("problem.epslion"), std::string::npos) << e.what();
    }
}

TEST(Config, SmallSigmaRejected) {
    try {
        (void)load_config_text(R"({"problem": {"sigma": 0.5, "f": [{"center": 0, "halfwidth": 0.2}]}})");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("problem.sigma"), std::string::npos) << e.what();
    }
}

TEST(Config, TypeErrorsNamePath) {
    try {
        (void)load_config_text(R"({"solver": {"dx": "fine"}})");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("solver.dx"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_config_text("{not json"), ConfigError);
    EXPECT_THROW(load_config_text(R"({"experiment": {"epsilons": [0.01, 0.1]}})"), ConfigError);
}

TEST(Outputs, EmptyListWritesEmptyManifest) {
    const auto d = scratch("empty");
    const auto m = emit_outputs({}, d);
    EXPECT_TRUE(m.empty());
    const json man = json::parse(slurp(d / kManifestName));
    EXPECT_TRUE(man["files"].empty());
}

TEST(Outputs, DigestsAreStable) {
    const std::vector<Artifact> arts{{"a.txt", "alpha\n"}, {"b.csv", "x,y\n1,2\n"}};
    const auto d1 = scratch("digest1"), d2 = scratch("digest2");
    const auto m1 = emit_outputs(arts, d1), m2 = emit_outputs(arts, d2);
    ASSERT_EQ(m1.size(), 2u);
    for (std::size_t i = 0; i < m1.size(); ++i) {
        EXPECT_EQ(m1[i].sha256, m2[i].sha256);
        EXPECT_EQ(m1[i].bytes, arts[i].content.size());
    }
    EXPECT_EQ(slurp(d1 / kManifestName), slurp(d2 / kManifestName));
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Tool, SolveWritesArtifacts) {
    const auto d = scratch("solve");
    ASSERT_EQ(tool("solve", small_solve(), d), 0) << log_of(d);
    const std::string csv = slurp(d / "snapshots.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,x,v,w,z");
    EXPECT_TRUE(fs::exists(d / "summary.json"));
    EXPECT_TRUE(fs::exists(d / "config.resolved.json"));
    EXPECT_FALSE(fs::exists(d / kIncompleteMarker));
    const json man = json::parse(slurp(d / kManifestName));
    EXPECT_EQ(man["exit_status"], 0);
    for (const auto& f : man["files"]) EXPECT_EQ(f["sha256"], sha256_hex(slurp(d / f["name"].get<std::string>())));
}

TEST(Tool, RerunIsByteIdentical) {
    const auto d1 = scratch("rerun1"), d2 = scratch("rerun2");
    ASSERT_EQ(tool("solve", small_solve(), d1), 0);
    ASSERT_EQ(tool("solve", small_solve(), d2), 0);
    EXPECT_EQ(slurp(d1 / kManifestName), slurp(d2 / kManifestName));
}

TEST(Tool, CompletedDirectoryIsNotTouched) {
    const auto d = scratch("complete");
    ASSERT_EQ(tool("solve", small_solve(), d), 0);
    const std::string before = slurp(d / kManifestName);
    const auto stamp = fs::last_write_time(d / "snapshots.csv");
    json other = small_solve();
    other["problem"]["epsilon"] = 0.2;
    EXPECT_EQ(tool("solve", other, d), 2);
    EXPECT_EQ(slurp(d / kManifestName), before);
    EXPECT_EQ(fs::last_write_time(d / "snapshots.csv"), stamp);
}

TEST(Tool, UsageErrorsExitTwo) {
    const auto d = scratch("usage");
    EXPECT_EQ(tool("solve", json{{"problem", {{"epslion", 0.1}}}}, d), 2);
    EXPECT_NE(log_of(d).find("problem.epslion"), std::string::npos);
    const auto d2 = scratch("usage2");
    EXPECT_EQ(tool("frobnicate", small_solve(), d2), 2);
    const auto d3 = scratch("usage3");
    EXPECT_EQ(tool("verify-t2", small_solve(), d3), 2);
}

TEST(Tool, OracleSweepAndReport) {
    const auto d = scratch("sweep");
    const json cfg = {{"problem", {{"f", {{{"center", 0.0}, {"halfwidth", 1.0}}}}}},
                      {"experiment", {{"epsilons", {0.1, 0.03, 0.01, 0.003}}}}};
    ASSERT_EQ(tool("sweep", cfg, d), 0) << log_of(d);
    const std::string csv = slurp(d / "sweep.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "epsilon,T,source,criterion,dx_finest");
    const json summary = json::parse(slurp(d / "summary.json"));
    EXPECT_NEAR(summary["fit"]["slope"].get<double>(), -1.0, 0.05);

    const auto r = scratch("report");
    json rc = cfg;
    rc["experiment"]["sweep_csv"] = (d / "sweep.csv").string();
    ASSERT_EQ(tool("report", rc, r), 0) << log_of(r);
    const std::string svg = slurp(r / "scaling.svg");
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Tool, VerifyT1PassesOnPositiveData) {
    const auto d = scratch("t1pass");
    const json cfg = {{"problem", {{"epsilon", 0.1}, {"f", {{{"center", -0.5}, {"halfwidth", 0.5}}}}}},
                      {"solver", {{"dx", 4e-3}, {"t_max", 10}}}};
    ASSERT_EQ(tool("verify-t1", cfg, d), 0) << log_of(d);
    const std::string csv = slurp(d / "functionals.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,H,H1,H2,Fser");
    EXPECT_TRUE(json::parse(slurp(d / "bound_report.json"))["all_pass"].get<bool>());
    EXPECT_TRUE(fs::exists(d / "H_bounds.svg"));
}

TEST(Tool, VerifyT1NamesFailingInequality) {
    const auto d = scratch("t1fail");
    const json cfg = {{"problem",
                       {{"epsilon", 0.005},
                        {"f", {{{"center", -0.875}, {"halfwidth", 0.125}, {"amplitude", 1.0}},
                               {{"center", -0.625}, {"halfwidth", 0.125}, {"amplitude", -5.0}}}}}},
                      {"solver", {{"dx", 4e-3}, {"t_max", 0.5}}}};
    EXPECT_EQ(tool("verify-t1", cfg, d), 1) << log_of(d);
    const json rep = json::parse(slurp(d / "bound_report.json"));
    EXPECT_FALSE(rep["all_pass"].get<bool>());
    bool named = false;
    for (const auto& n : rep["failed"]) named |= n == "H2_floor";
    EXPECT_TRUE(named) << rep["failed"].dump();
}

TEST(Tool, VerifyT1RefusalExitsOne) {
    const auto d = scratch("t1refuse");
    const json cfg = {{"problem", {{"f", {{{"center", 0.5}, {"halfwidth", 0.3}}}}}}};
    EXPECT_EQ(tool("verify-t1", cfg, d), 1);
    const json rep = json::parse(slurp(d / "report.json"));
    EXPECT_EQ(rep["status"], "refused");
    EXPECT_NEAR(rep["translation_hint"].get<double>(), -1.2, 1e-12);
}

TEST(Tool, VerifyT2InapplicableExitsZero) {
    const auto d = scratch("t2inapp");
    const json cfg = {{"problem",
                       {{"variant", "time"},
                        {"epsilon", 0.6},
                        {"f", json::array()},
                        {"g", {{{"center", -0.5}, {"halfwidth", 0.5}}}}}},
                      {"experiment", {{"branch", "g"}}},
                      {"solver", {{"dx", 1e-2}, {"t_max", 1}}}};
    EXPECT_EQ(tool("verify-t2", cfg, d), 0) << log_of(d);
    EXPECT_EQ(json::parse(slurp(d / "comparison.json"))["status"], "inapplicable");
}

TEST(Tool, DefaultDirectoryUsesDigest) {
    const RunConfig a = load_config_text("{}");
    const RunConfig b = load_config_text(R"({"problem": {"epsilon": 0.05}})");
    const RunConfig c = load_config_text(R"({"problem": {"epsilon": 0.06}})");
    EXPECT_EQ(default_out_dir("solve", a), default_out_dir("solve", b));
    EXPECT_NE(default_out_dir("solve", a), default_out_dir("solve", c));
    EXPECT_EQ(default_out_dir("solve", a).filename().string().rfind("solve-", 0), 0u);
}
