#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "scenarios.hpp"
#include "screwiga/error.hpp"
#include "screwiga/pipeline.hpp"
#include "screwiga/serialize.hpp"

using namespace screwiga;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kMinimal = R"({
  // clouds resolve relative to the config
  "geometry": { "male": { "cloud": "m.txt" }, "female": { "cloud": "f.txt" } },
  "material": { "E_GPa": 209, "nu": 0.3, "alpha": 12e-6 }
})";

const char* kBar = R"({
  "geometry": { "kind": "bar", "bar": { "size": [10, 10, 100], "spans": [1, 1, 4], "degree": 2 } },
  "material": { "E_GPa": 209, "nu": 0.3, "alpha": 12e-6, "T0": 70 },
  "temperature": { "mode": "uniform", "T": 170 },
  "output": { "export_resolution": 3 }
})";

fs::path circleProject(const std::string& name) {
  const auto dir = scenario::scratchDir(name);
  scenario::writeCircleCloud(dir / "m.txt", 30.0, 720);
  scenario::writeCircleCloud(dir / "f.txt", 45.0, 720, 80.0);
  scenario::writeText(dir / "cfg.json", kMinimal);
  return dir;
}

json readJson(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in, nullptr, true, true);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string configError(const std::string& text) {
  try {
    parseConfigText(text, "/tmp", false);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    return e.what();
  }
  return "";
}

} // namespace

TEST(Config, MinimalConfigGetsDefaults) {
  const auto c = parseConfigText(kMinimal, "/data", false);
  EXPECT_EQ(c.kind, "compressor");
  EXPECT_EQ(c.fitDegree, 3);
  EXPECT_NEAR(c.fitTolerance, 0.1 * c.clearance, 1e-15);
  EXPECT_NEAR(c.clearance, 0.044, 1e-15);
  EXPECT_EQ(c.layers, 20);
  EXPECT_EQ(c.rotors.size(), 2u);
  EXPECT_EQ(c.rotors[0].cloud, "/data/m.txt");
  EXPECT_EQ(c.rotors[1].center, Eigen::Vector2d(80.0, 0.0));
  EXPECT_TRUE(c.casing);
  EXPECT_NEAR(c.material.T0, 70.0, 0.0);
}

TEST(Config, PoissonOutOfRangeNamesField) {
  const std::string msg = configError(R"({
    "geometry": { "male": { "cloud": "m.txt" }, "female": { "cloud": "f.txt" } },
    "material": { "E_GPa": 209, "nu": 0.7, "alpha": 12e-6 } })");
  EXPECT_NE(msg.find("material.nu"), std::string::npos) << msg;
}

TEST(Config, MissingRequiredFieldsAreNamed) {
  EXPECT_NE(configError(R"({"geometry": {"male": {"cloud": "m"}, "female": {"cloud": "f"}},
                            "material": {"nu": 0.3, "alpha": 1e-5}})")
                .find("E_GPa"),
            std::string::npos);
  EXPECT_NE(configError(R"({"geometry": {"male": {}, "female": {"cloud": "f"}},
                            "material": {"E_GPa": 209, "nu": 0.3, "alpha": 1e-5}})")
                .find("cloud"),
            std::string::npos);
  EXPECT_NE(configError("{ not json").size(), 0u);
  EXPECT_NE(configError(R"({"geometry": {"kind": "bar"}, "material": {"E_GPa": 209, "nu": 0.3, "alpha": 1e-5},
                            "temperature": {"mode": "radiant"}})")
                .find("temperature.mode"),
            std::string::npos);
}

TEST(Config, StrictModeRejectsUnknownKeys) {
  const std::string text = R"({"geometry": {"kind": "bar", "colour": "red"},
                                "material": {"E_GPa": 209, "nu": 0.3, "alpha": 1e-5}})";
  EXPECT_THROW(parseConfigText(text, "/tmp", true), Error);
  const auto c = parseConfigText(text, "/tmp", false);
  ASSERT_FALSE(c.warnings.empty());
  EXPECT_NE(c.warnings.front().find("colour"), std::string::npos);
}

TEST(Config, EchoReparsesToSameConfig) {
  for (const char* text : {kMinimal, kBar}) {
    const auto a = parseConfigText(text, "/data", true);
    const auto b = parseConfigText(a.resolved.dump(), "/elsewhere", true);
    EXPECT_EQ(a.resolved, b.resolved);
    EXPECT_EQ(a.fitTolerance, b.fitTolerance);
    EXPECT_EQ(a.material.lambda, b.material.lambda);
    EXPECT_EQ(a.bcModes, b.bcModes);
  }
}

TEST(Config, BundledConfigsParseStrictly) {
  for (const char* name : {"compressor.json", "bar.json"})
    EXPECT_NO_THROW(parseConfig(std::string(SCREWIGA_DATA_DIR) + "/" + name, true)) << name;
}

TEST(Pipeline, BarAllGivesAnalyticElongation) {
  const auto dir = scenario::scratchDir("bar_all");
  scenario::writeText(dir / "bar.json", kBar);
  RunOptions o;
  o.outDir = (dir / "out").string();
  const auto r = runPipeline("all", (dir / "bar.json").string(), o);
  ASSERT_EQ(r.exitCode, 0) << r.message;
  const auto m = readJson(dir / "out" / "manifest.json");
  EXPECT_EQ(m["status"], "ok");
  EXPECT_NEAR(m["results"]["solve"]["bar"]["elongation_max_um"].get<double>(), 120.0, 1e-3);
  for (const char* k : {"tool", "version", "inputs", "timings", "dofs", "residuals", "config", "warnings"})
    EXPECT_TRUE(m.contains(k)) << k;
  EXPECT_TRUE(fs::exists(dir / "out" / "bar.geo"));
  EXPECT_TRUE(fs::exists(dir / "out" / "bar.disp"));
  EXPECT_TRUE(fs::exists(dir / "out" / "bar.vtk"));
}

TEST(Pipeline, StagesReusePersistedArtifacts) {
  const auto dir = scenario::scratchDir("bar_stages");
  scenario::writeText(dir / "bar.json", kBar);
  RunOptions o;
  o.outDir = (dir / "out").string();
  const std::string cfg = (dir / "bar.json").string();
  ASSERT_EQ(runPipeline("mesh", cfg, o).exitCode, 0);
  const auto geo = slurp(dir / "out" / "bar.geo");
  const auto r = runPipeline("solve", cfg, o);
  ASSERT_EQ(r.exitCode, 0) << r.message;
  EXPECT_EQ(slurp(dir / "out" / "bar.geo"), geo);
  EXPECT_NEAR(r.manifest["results"]["solve"]["bar"]["elongation_max_um"].get<double>(), 120.0, 1e-3);
  EXPECT_EQ(runPipeline("clearance", cfg, o).exitCode, 0);
}

TEST(Pipeline, SolveWithoutMeshFailsWithGeometryCode) {
  const auto dir = scenario::scratchDir("no_mesh");
  scenario::writeText(dir / "bar.json", kBar);
  RunOptions o;
  o.outDir = (dir / "out").string();
  const auto r = runPipeline("solve", (dir / "bar.json").string(), o);
  EXPECT_EQ(r.exitCode, 3);
  EXPECT_NE(r.message.find("bar.geo"), std::string::npos) << r.message;
  const auto m = readJson(dir / "out" / "manifest.json");
  EXPECT_EQ(m["status"], "error");
  EXPECT_EQ(m["error"]["exit_code"], 3);
}

TEST(Pipeline, ConfigErrorStillWritesManifest) {
  const auto dir = scenario::scratchDir("bad_cfg");
  scenario::writeText(dir / "bad.json", R"({"geometry": {"kind": "bar"}, "material": {"E_GPa": 209, "nu": 0.7, "alpha": 0}})");
  RunOptions o;
  o.outDir = (dir / "out").string();
  const auto r = runPipeline("all", (dir / "bad.json").string(), o);
  EXPECT_EQ(r.exitCode, 2);
  EXPECT_EQ(readJson(dir / "out" / "manifest.json")["error"]["kind"], "config");
  EXPECT_EQ(runPipeline("polish", (dir / "bad.json").string(), o).exitCode, 2);
}

TEST(Pipeline, FitOnCircleCloudMeetsTolerance) {
  const auto dir = circleProject("fit_circle");
  RunOptions o;
  o.outDir = (dir / "out").string();
  const auto r = runPipeline("fit", (dir / "cfg.json").string(), o);
  ASSERT_EQ(r.exitCode, 0) << r.message;
  const auto rep = readJson(dir / "out" / "fit_report.json");
  for (const char* rotor : {"male", "female"}) {
    EXPECT_LE(rep[rotor]["max_deviation_um"].get<double>(), rep[rotor]["tolerance_um"].get<double>());
    EXPECT_TRUE(fs::exists(dir / "out" / (std::string(rotor) + "_curve.geo")));
  }
  EXPECT_NEAR(rep["female"]["max_radius_mm"].get<double>(), 45.0, 4.4e-3);
  EXPECT_TRUE(r.manifest["inputs"].contains("male_cloud"));
}

TEST(Pipeline, RepeatedRunsAreIdentical) {
  std::string geo[2], disp[2];
  for (int k = 0; k < 2; ++k) {
    const auto dir = scenario::scratchDir("repeat" + std::to_string(k));
    scenario::writeText(dir / "bar.json", kBar);
    RunOptions o;
    o.outDir = (dir / "out").string();
    ASSERT_EQ(runPipeline("all", (dir / "bar.json").string(), o).exitCode, 0);
    geo[k] = slurp(dir / "out" / "bar.geo");
    disp[k] = slurp(dir / "out" / "bar.disp");
  }
  EXPECT_EQ(geo[0], geo[1]);
  EXPECT_EQ(disp[0], disp[1]);
}

// ---------------------------------------------------------------------------
// Command line front-end
// ---------------------------------------------------------------------------

namespace {

int runCli(const std::string& args) {
  const std::string cmd = std::string(SCREWIGA_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Cli, ExitCodes) {
  const auto dir = scenario::scratchDir("cli");
  scenario::writeText(dir / "bar.json", kBar);
  const std::string cfg = (dir / "bar.json").string();
  EXPECT_EQ(runCli("solve --config " + cfg + " --out-dir " + (dir / "a").string()), 3);
  EXPECT_EQ(runCli("all --config " + cfg + " --out-dir " + (dir / "b").string()), 0);
  EXPECT_NEAR(readJson(dir / "b" / "manifest.json")["results"]["solve"]["bar"]["elongation_max_um"].get<double>(),
              120.0, 1e-3);
  EXPECT_EQ(runCli("all"), 2);
  EXPECT_EQ(runCli("mesh --config /nonexistent.json"), 2);
  EXPECT_EQ(runCli("--version"), 0);
  EXPECT_EQ(runCli("config --config " + cfg), 0);
  scenario::writeText(dir / "bad.json", R"({"geometry": {"kind": "bar"}, "material": {"E_GPa": 209, "nu": 0.7, "alpha": 0}})");
  EXPECT_EQ(runCli("fit --config " + (dir / "bad.json").string() + " --out-dir " + (dir / "c").string()), 2);
}

TEST(Cli, FitCircleAndSynth) {
  const auto dir = circleProject("cli_fit");
  EXPECT_EQ(runCli("fit --config " + (dir / "cfg.json").string() + " --out-dir " + (dir / "out").string()), 0);
  const auto rep = readJson(dir / "out" / "fit_report.json");
  EXPECT_LE(rep["male"]["max_deviation_um"].get<double>(), rep["male"]["tolerance_um"].get<double>());
  EXPECT_EQ(runCli("synth --out-dir " + (dir / "synth").string()), 0);
  EXPECT_EQ(loadPointCloud((dir / "synth" / "male.txt").string()).points.size(), 2572u);
}
