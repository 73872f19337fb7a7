// Batch front-end over the C interface.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "screwiga/screwiga.h"

namespace {

int exitCode(sgi_status s) {
  if (s == SGI_ERR_INVALID_ARGUMENT)
    return 2;
  return static_cast<int>(s);
}

int report(sgi_status s, const std::string& what) {
  if (s == SGI_OK)
    return 0;
  std::fprintf(stderr, "screwiga: %s failed: %s\n", what.c_str(), sgi_last_error());
  return exitCode(s);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal expansion analysis of screw compressor rotors and casing"};
  app.set_version_flag("--version", std::string(sgi_version()));
  app.require_subcommand(1);

  std::string config;
  std::string outDir = ".";
  int threads = 0;
  bool strict = false;

  const char* stages[][2] = {
      {"fit", "Fit spline curves to the rotor point clouds"},
      {"mesh", "Build rotor and casing volume models from the fitted curves"},
      {"solve", "Solve the thermoelastic problem on every part"},
      {"clearance", "Measure clearances before and after deformation"},
      {"all", "Run fit, mesh, solve and clearance in sequence"},
  };
  for (const auto& s : stages) {
    CLI::App* sub = app.add_subcommand(s[0], s[1]);
    sub->add_option("--config", config, "Pipeline config (JSON, comments allowed)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-dir", outDir, "Directory for artifacts and manifest.json");
    sub->add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--strict", strict, "Reject unknown config keys");
  }
  CLI::App* echo = app.add_subcommand("config", "Print the resolved config with defaults applied");
  echo->add_option("--config", config, "Pipeline config")->required()->check(CLI::ExistingFile);
  echo->add_flag("--strict", strict, "Reject unknown config keys");

  std::string synthDir = ".";
  CLI::App* synth = app.add_subcommand("synth", "Write the synthetic male and female profile clouds");
  synth->add_option("--out-dir", synthDir, "Target directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (synth->parsed())
    return report(sgi_write_synthetic_clouds(synthDir.c_str()), "synth");

  sgi_pipeline* p = nullptr;
  if (int rc = report(sgi_pipeline_create(config.c_str(), strict ? 1 : 0, &p), "config"))
    return rc;

  if (echo->parsed()) {
    const char* text = sgi_pipeline_config(p);
    int rc = 0;
    if (text)
      std::printf("%s\n", text);
    else
      rc = report(SGI_ERR_CONFIG, "config");
    sgi_pipeline_destroy(p);
    return rc;
  }

  if (int rc = report(sgi_set_threads(threads), "threads")) {
    sgi_pipeline_destroy(p);
    return rc;
  }
  const std::string stage = app.get_subcommands().front()->get_name();
  const sgi_status s = sgi_pipeline_run(p, stage.c_str(), outDir.c_str());
  sgi_pipeline_destroy(p);
  if (s == SGI_OK)
    std::printf("%s: ok (manifest in %s/manifest.json)\n", stage.c_str(), outDir.c_str());
  return report(s, stage);
}
