#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "screwiga/discretize.hpp"
#include "screwiga/geomgen.hpp"
#include "screwiga/material.hpp"
#include "screwiga/thermoelastic.hpp"

namespace screwiga {

struct RotorConfig {
  std::string name;
  std::string cloud;                  ///< absolute or config-relative path
  std::optional<std::vector<int>> corners;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double pitchDegrees = 0.0;
  double coreRadius = 0.0;            ///< mm, 0 = automatic
  double bore = 0.0;                  ///< mm, 0 = fitted outer radius + clearance
};

/// Validated configuration in mm, N, degrees Celsius.
struct PipelineConfig {
  nlohmann::json resolved;            ///< input units, defaults applied; reparses to the same config
  std::string baseDir;

  std::string kind;                   ///< "compressor" or "bar"

  std::vector<RotorConfig> rotors;
  double clearance = 0.044;
  int fitDegree = 3;
  double fitTolerance = 0.0044;
  int maxControlPoints = 200;
  double axisDistance = 80.0;
  double length = 168.3;
  double shaftLength = 30.0;
  int layers = 20;
  bool casing = true;
  double casingThickness = 6.0;
  int casingLayers = 20;

  Eigen::Vector3d barSize{10.0, 10.0, 100.0};
  std::array<int, 3> barSpans{1, 1, 4};
  int barDegree = 2;

  double youngsModulus = 209000.0;
  double poisson = 0.3;
  Material material;

  std::string temperatureMode;        ///< linear-axial | uniform | solve-laplace
  double Tlow = 70.0;
  double Thigh = 200.0;
  double Tuniform = 200.0;

  std::map<std::string, BoundaryConditionSet> bcs;
  std::map<std::string, std::map<std::string, std::string>> bcModes;   ///< part -> boundary -> mode

  int rotorDegree = 3;
  int casingDegree = 2;
  int rotorRefine = 0;
  int casingRefine = 1;
  int quadraturePoints = 0;
  SolverOptions solver;

  int exportResolution = 9;
  bool exportVtk = true;
  std::vector<double> clearanceStations;
  int clearanceResolution = 2048;
  std::vector<double> t0Sensitivity;

  std::vector<std::string> warnings;
};

PipelineConfig parseConfigText(const std::string& text, const std::string& baseDir, bool strict);
PipelineConfig parseConfig(const std::string& path, bool strict);

struct RunOptions {
  std::string outDir = ".";
  int threads = 0;
  bool strict = false;
};

struct RunResult {
  int exitCode = 0;
  std::string message;
  nlohmann::json manifest;
};

/// Runs fit | mesh | solve | clearance | all. Writes manifest.json into the output
/// directory on success and on failure.
RunResult runPipeline(const std::string& stage, const std::string& configPath, const RunOptions& options);

/// Synthetic four-lobe male (2572 points, four tip corners) and six-lobe female
/// (2292 points) profiles used as stand-ins for measured clouds.
PointCloud2D syntheticMaleCloud();
PointCloud2D syntheticFemaleCloud(double axisDistance = 80.0);
void writeSyntheticClouds(const std::string& dir);

/// Largest distance from center to a closed planar curve.
double maxRadius(const TensorPatch& curve, const Eigen::Vector2d& center);

} // namespace screwiga
