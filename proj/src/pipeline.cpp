#include "screwiga/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "screwiga/error.hpp"
#include "screwiga/parallel.hpp"
#include "screwiga/postproc.hpp"
#include "screwiga/serialize.hpp"

namespace screwiga {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Config reading
// ---------------------------------------------------------------------------

std::string where(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

class ConfigReader {
public:
  ConfigReader(bool strict, std::vector<std::string>& warnings) : strict_(strict), warnings_(warnings) {}

  void checkKeys(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
    std::set<std::string> allowed(known.begin(), known.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (allowed.count(it.key()))
        continue;
      if (strict_)
        fail(ErrorKind::Config, "unknown key " + where(path, it.key()));
      warnings_.push_back("ignored unknown key " + where(path, it.key()));
    }
  }

  const json& object(const json& parent, const char* key, const std::string& path, bool required) {
    static const json empty = json::object();
    auto it = parent.find(key);
    if (it == parent.end()) {
      require(!required, ErrorKind::Config, "missing required section " + where(path, key));
      return empty;
    }
    require(it->is_object(), ErrorKind::Config, where(path, key) + " must be an object");
    return *it;
  }

  double number(const json& o, const char* key, const std::string& path, std::optional<double> def) {
    auto it = o.find(key);
    if (it == o.end()) {
      require(def.has_value(), ErrorKind::Config, "missing required field " + where(path, key));
      return *def;
    }
    require(it->is_number(), ErrorKind::Config, where(path, key) + " must be a number");
    const double v = it->get<double>();
    require(std::isfinite(v), ErrorKind::Config, where(path, key) + " must be finite");
    return v;
  }

  int integer(const json& o, const char* key, const std::string& path, int def) {
    auto it = o.find(key);
    if (it == o.end())
      return def;
    require(it->is_number_integer(), ErrorKind::Config, where(path, key) + " must be an integer");
    return it->get<int>();
  }

  std::string text(const json& o, const char* key, const std::string& path, std::optional<std::string> def) {
    auto it = o.find(key);
    if (it == o.end()) {
      require(def.has_value(), ErrorKind::Config, "missing required field " + where(path, key));
      return *def;
    }
    require(it->is_string(), ErrorKind::Config, where(path, key) + " must be a string");
    return it->get<std::string>();
  }

  bool flag(const json& o, const char* key, const std::string& path, bool def) {
    auto it = o.find(key);
    if (it == o.end())
      return def;
    require(it->is_boolean(), ErrorKind::Config, where(path, key) + " must be true or false");
    return it->get<bool>();
  }

  std::vector<double> numbers(const json& o, const char* key, const std::string& path, std::vector<double> def,
                              int size = -1) {
    auto it = o.find(key);
    if (it == o.end())
      return def;
    return numberArray(*it, where(path, key), size);
  }

  static std::vector<double> numberArray(const json& v, const std::string& name, int size = -1) {
    require(v.is_array(), ErrorKind::Config, name + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      require(e.is_number() && std::isfinite(e.get<double>()), ErrorKind::Config,
              name + " must be an array of numbers");
      out.push_back(e.get<double>());
    }
    require(size < 0 || static_cast<int>(out.size()) == size, ErrorKind::Config,
            name + " must have " + std::to_string(size) + " entries");
    return out;
  }

private:
  bool strict_;
  std::vector<std::string>& warnings_;
};

void positive(double v, const std::string& name) {
  require(v > 0.0, ErrorKind::Config, name + " must be positive");
}

void atLeast(int v, int lo, const std::string& name) {
  require(v >= lo, ErrorKind::Config, name + " must be at least " + std::to_string(lo));
}

std::string resolvePath(const std::string& p, const std::string& baseDir) {
  fs::path path(p);
  if (path.is_relative() && !baseDir.empty())
    path = fs::path(baseDir) / path;
  return path.lexically_normal().string();
}

const char* solverName(SolverMethod m) {
  switch (m) {
  case SolverMethod::Direct:
    return "direct";
  case SolverMethod::ConjugateGradient:
    return "cg";
  default:
    return "auto";
  }
}

json defaultBcs(const PipelineConfig& c, const std::string& part) {
  if (part == "bar") {
    const double sx = c.barSize.x();
    return json{{"zLow", "roller"},
                {"pins", json::array({json{{"point", {0.0, 0.0, 0.0}}, {"components", {0, 1}}},
                                      json{{"point", {sx, 0.0, 0.0}}, {"components", {1}}}})}};
  }
  if (part == "casing")
    return json{{"casingOuter", "fixed"}};
  return json{{"lowPressureEnd", "fixed"}, {"highPressureEnd", "free"}, {"lateral", "free"}};
}

void parseBcs(ConfigReader& rd, const json& spec, const std::string& part, int dim, PipelineConfig& c) {
  const std::string path = "bcs." + part;
  require(spec.is_object(), ErrorKind::Config, path + " must be an object");
  BoundaryConditionSet set;
  auto& modes = c.bcModes[part];
  for (auto it = spec.begin(); it != spec.end(); ++it) {
    const std::string& name = it.key();
    const json& v = *it;
    if (name == "pins") {
      require(v.is_array(), ErrorKind::Config, path + ".pins must be an array");
      for (const auto& pin : v) {
        require(pin.is_object(), ErrorKind::Config, path + ".pins entries must be objects");
        rd.checkKeys(pin, {"point", "components"}, path + ".pins");
        const auto pt = ConfigReader::numberArray(pin.at("point"), path + ".pins.point", dim);
        VertexPin vp;
        vp.point = Eigen::Map<const Eigen::VectorXd>(pt.data(), dim);
        require(pin.contains("components") && pin["components"].is_array(), ErrorKind::Config,
                path + ".pins.components must be an array");
        vp.components = {false, false, false};
        for (const auto& k : pin["components"]) {
          require(k.is_number_integer() && k.get<int>() >= 0 && k.get<int>() < dim, ErrorKind::Config,
                  path + ".pins.components entries must be component indices");
          vp.components[k.get<int>()] = true;
        }
        set.pins.push_back(vp);
      }
      continue;
    }
    if (v.is_string()) {
      const std::string mode = v.get<std::string>();
      if (mode == "fixed")
        set.fixed.push_back(name);
      else if (mode == "sliding")
        set.sliding.push_back(name);
      else if (mode == "roller")
        set.roller.push_back(name);
      else if (mode == "free")
        set.free.push_back(name);
      else
        fail(ErrorKind::Config, where(path, name) + ": unknown mode '" + mode +
                                    "' (fixed, sliding, roller, free or {\"traction\": [...]})");
      modes[name] = mode;
      continue;
    }
    require(v.is_object() && v.contains("traction"), ErrorKind::Config,
            where(path, name) + " must be a mode string or {\"traction\": [...]}");
    rd.checkKeys(v, {"traction"}, where(path, name));
    const auto t = ConfigReader::numberArray(v["traction"], where(path, name) + ".traction", dim);
    set.tractions.emplace_back(name, Eigen::Map<const Eigen::VectorXd>(t.data(), dim));
    modes[name] = "traction";
  }
  c.bcs[part] = set;
}

std::vector<std::string> partNames(const PipelineConfig& c) {
  if (c.kind == "bar")
    return {"bar"};
  std::vector<std::string> parts{"male", "female"};
  if (c.casing)
    parts.push_back("casing");
  return parts;
}

} // namespace

PipelineConfig parseConfigText(const std::string& text, const std::string& baseDir, bool strict) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
  }
  require(root.is_object(), ErrorKind::Config, "config must be a JSON object");

  PipelineConfig c;
  c.baseDir = baseDir;
  ConfigReader rd(strict, c.warnings);
  rd.checkKeys(root, {"geometry", "material", "temperature", "bcs", "discretization", "output"}, "");
  json echo;

  // geometry
  const json& g = rd.object(root, "geometry", "", true);
  rd.checkKeys(g, {"kind", "clearance_um", "fit_degree", "fit_tolerance_um", "max_control_points", "axis_distance",
                   "length", "shaft_length", "layers", "casing", "casing_thickness", "casing_layers", "male",
                   "female", "bar"},
               "geometry");
  c.kind = rd.text(g, "kind", "geometry", "compressor");
  require(c.kind == "compressor" || c.kind == "bar", ErrorKind::Config,
          "geometry.kind must be \"compressor\" or \"bar\"");
  json& ge = echo["geometry"];
  ge["kind"] = c.kind;
  if (c.kind == "compressor") {
    const double clearanceUm = rd.number(g, "clearance_um", "geometry", 44.0);
    positive(clearanceUm, "geometry.clearance_um");
    const double tolUm = rd.number(g, "fit_tolerance_um", "geometry", 0.1 * clearanceUm);
    positive(tolUm, "geometry.fit_tolerance_um");
    c.clearance = clearanceUm * 1e-3;
    c.fitTolerance = tolUm * 1e-3;
    c.fitDegree = rd.integer(g, "fit_degree", "geometry", 3);
    atLeast(c.fitDegree, 1, "geometry.fit_degree");
    require(c.fitDegree <= kMaxDegree, ErrorKind::Config, "geometry.fit_degree exceeds the supported degree");
    c.maxControlPoints = rd.integer(g, "max_control_points", "geometry", 200);
    atLeast(c.maxControlPoints, c.fitDegree + 1, "geometry.max_control_points");
    c.axisDistance = rd.number(g, "axis_distance", "geometry", 80.0);
    positive(c.axisDistance, "geometry.axis_distance");
    c.length = rd.number(g, "length", "geometry", 168.3);
    positive(c.length, "geometry.length");
    c.shaftLength = rd.number(g, "shaft_length", "geometry", 30.0);
    positive(c.shaftLength, "geometry.shaft_length");
    c.layers = rd.integer(g, "layers", "geometry", 20);
    c.casing = rd.flag(g, "casing", "geometry", true);
    c.casingThickness = rd.number(g, "casing_thickness", "geometry", 6.0);
    positive(c.casingThickness, "geometry.casing_thickness");
    c.casingLayers = rd.integer(g, "casing_layers", "geometry", c.layers);
    ge["clearance_um"] = clearanceUm;
    ge["fit_tolerance_um"] = tolUm;
    ge["fit_degree"] = c.fitDegree;
    ge["max_control_points"] = c.maxControlPoints;
    ge["axis_distance"] = c.axisDistance;
    ge["length"] = c.length;
    ge["shaft_length"] = c.shaftLength;
    ge["layers"] = c.layers;
    ge["casing"] = c.casing;
    ge["casing_thickness"] = c.casingThickness;
    ge["casing_layers"] = c.casingLayers;

    const char* names[2] = {"male", "female"};
    const double pitches[2] = {300.0, -200.0};
    for (int r = 0; r < 2; ++r) {
      const std::string path = std::string("geometry.") + names[r];
      const json& rj = rd.object(g, names[r], "geometry", true);
      rd.checkKeys(rj, {"cloud", "corners", "pitch_deg", "core_radius", "bore"}, path);
      RotorConfig rc;
      rc.name = names[r];
      rc.cloud = resolvePath(rd.text(rj, "cloud", path, std::nullopt), baseDir);
      if (rj.contains("corners")) {
        require(rj["corners"].is_array(), ErrorKind::Config, path + ".corners must be an array of indices");
        std::vector<int> corners;
        for (const auto& k : rj["corners"]) {
          require(k.is_number_integer() && k.get<int>() >= 0, ErrorKind::Config,
                  path + ".corners must be an array of indices");
          corners.push_back(k.get<int>());
        }
        rc.corners = corners;
      }
      rc.center = r == 0 ? Eigen::Vector2d(0.0, 0.0) : Eigen::Vector2d(c.axisDistance, 0.0);
      rc.pitchDegrees = rd.number(rj, "pitch_deg", path, pitches[r]);
      rc.coreRadius = rd.number(rj, "core_radius", path, 0.0);
      require(rc.coreRadius >= 0.0, ErrorKind::Config, path + ".core_radius must not be negative");
      rc.bore = rd.number(rj, "bore", path, 0.0);
      require(rc.bore >= 0.0, ErrorKind::Config, path + ".bore must not be negative");
      json& re = ge[names[r]];
      re["cloud"] = rc.cloud;
      if (rc.corners)
        re["corners"] = *rc.corners;
      re["pitch_deg"] = rc.pitchDegrees;
      re["core_radius"] = rc.coreRadius;
      re["bore"] = rc.bore;
      c.rotors.push_back(rc);
    }
  } else {
    const json& bj = rd.object(g, "bar", "geometry", false);
    rd.checkKeys(bj, {"size", "spans", "degree"}, "geometry.bar");
    const auto size = rd.numbers(bj, "size", "geometry.bar", {10.0, 10.0, 100.0}, 3);
    for (double s : size)
      positive(s, "geometry.bar.size");
    c.barSize = Eigen::Vector3d(size[0], size[1], size[2]);
    const auto spans = rd.numbers(bj, "spans", "geometry.bar", {1, 1, 4}, 3);
    for (int k = 0; k < 3; ++k) {
      require(spans[k] >= 1 && spans[k] == std::floor(spans[k]), ErrorKind::Config,
              "geometry.bar.spans must be positive integers");
      c.barSpans[k] = static_cast<int>(spans[k]);
    }
    c.barDegree = rd.integer(bj, "degree", "geometry.bar", 2);
    atLeast(c.barDegree, 1, "geometry.bar.degree");
    c.length = c.barSize.z();
    c.casing = false;
    ge["bar"] = json{{"size", size}, {"spans", c.barSpans}, {"degree", c.barDegree}};
  }

  // material
  const json& m = rd.object(root, "material", "", true);
  rd.checkKeys(m, {"E_GPa", "nu", "alpha", "T0"}, "material");
  const double eGPa = rd.number(m, "E_GPa", "material", std::nullopt);
  positive(eGPa, "material.E_GPa");
  require(eGPa < 5000.0, ErrorKind::Config, "material.E_GPa is given in GPa; got " + std::to_string(eGPa));
  c.poisson = rd.number(m, "nu", "material", std::nullopt);
  require(c.poisson > -1.0 && c.poisson < 0.5, ErrorKind::Config, "material.nu must lie in (-1, 0.5)");
  const double alpha = rd.number(m, "alpha", "material", std::nullopt);
  require(alpha >= 0.0 && alpha < 1e-3, ErrorKind::Config, "material.alpha must be in 1/K, within [0, 1e-3)");
  const double T0 = rd.number(m, "T0", "material", 70.0);
  c.youngsModulus = eGPa * 1000.0;
  c.material = materialFromEngineering(c.youngsModulus, c.poisson, alpha, T0);
  echo["material"] = json{{"E_GPa", eGPa}, {"nu", c.poisson}, {"alpha", alpha}, {"T0", T0}};

  // temperature
  const json& t = rd.object(root, "temperature", "", false);
  rd.checkKeys(t, {"mode", "T_low", "T_high", "T"}, "temperature");
  c.temperatureMode = rd.text(t, "mode", "temperature", c.kind == "bar" ? "uniform" : "linear-axial");
  require(c.temperatureMode == "linear-axial" || c.temperatureMode == "uniform" ||
              c.temperatureMode == "solve-laplace",
          ErrorKind::Config, "temperature.mode must be linear-axial, solve-laplace or uniform");
  c.Tlow = rd.number(t, "T_low", "temperature", 70.0);
  c.Thigh = rd.number(t, "T_high", "temperature", 200.0);
  c.Tuniform = rd.number(t, "T", "temperature", c.Thigh);
  for (double v : {c.Tlow, c.Thigh, c.Tuniform})
    require(v > -273.15, ErrorKind::Config, "temperatures are in degrees Celsius and must exceed -273.15");
  echo["temperature"] = json{{"mode", c.temperatureMode}, {"T_low", c.Tlow}, {"T_high", c.Thigh}, {"T", c.Tuniform}};

  // boundary conditions
  const json& b = rd.object(root, "bcs", "", false);
  const auto parts = partNames(c);
  for (auto it = b.begin(); it != b.end(); ++it)
    if (std::find(parts.begin(), parts.end(), it.key()) == parts.end()) {
      require(!strict, ErrorKind::Config, "unknown key bcs." + it.key());
      c.warnings.push_back("ignored unknown key bcs." + it.key());
    }
  for (const auto& part : parts) {
    const json spec = b.contains(part) ? b[part] : defaultBcs(c, part);
    parseBcs(rd, spec, part, 3, c);
    echo["bcs"][part] = spec;
  }

  // discretization
  const json& d = rd.object(root, "discretization", "", false);
  rd.checkKeys(d, {"rotor_degree", "casing_degree", "rotor_refine", "casing_refine", "quadrature_points", "solver",
                   "solver_tolerance", "direct_limit"},
               "discretization");
  c.rotorDegree = rd.integer(d, "rotor_degree", "discretization", 3);
  c.casingDegree = rd.integer(d, "casing_degree", "discretization", 2);
  c.rotorRefine = rd.integer(d, "rotor_refine", "discretization", 0);
  c.casingRefine = rd.integer(d, "casing_refine", "discretization", 1);
  c.quadraturePoints = rd.integer(d, "quadrature_points", "discretization", 0);
  atLeast(c.rotorDegree, 1, "discretization.rotor_degree");
  atLeast(c.casingDegree, 2, "discretization.casing_degree");
  require(c.rotorDegree <= kMaxDegree && c.casingDegree <= kMaxDegree, ErrorKind::Config,
          "discretization degrees exceed the supported degree");
  atLeast(c.rotorRefine, 0, "discretization.rotor_refine");
  atLeast(c.casingRefine, 0, "discretization.casing_refine");
  atLeast(c.quadraturePoints, 0, "discretization.quadrature_points");
  const std::string solver = rd.text(d, "solver", "discretization", "auto");
  if (solver == "auto")
    c.solver.method = SolverMethod::Auto;
  else if (solver == "direct")
    c.solver.method = SolverMethod::Direct;
  else if (solver == "cg")
    c.solver.method = SolverMethod::ConjugateGradient;
  else
    fail(ErrorKind::Config, "discretization.solver must be auto, direct or cg");
  c.solver.tolerance = rd.number(d, "solver_tolerance", "discretization", 1e-10);
  positive(c.solver.tolerance, "discretization.solver_tolerance");
  c.solver.directLimit = rd.integer(d, "direct_limit", "discretization", 40000);
  echo["discretization"] = json{{"rotor_degree", c.rotorDegree},         {"casing_degree", c.casingDegree},
                                {"rotor_refine", c.rotorRefine},         {"casing_refine", c.casingRefine},
                                {"quadrature_points", c.quadraturePoints}, {"solver", solverName(c.solver.method)},
                                {"solver_tolerance", c.solver.tolerance}, {"direct_limit", c.solver.directLimit}};

  // output
  const json& o = rd.object(root, "output", "", false);
  rd.checkKeys(o, {"export_resolution", "vtk", "clearance_stations", "clearance_resolution", "t0_sensitivity"},
               "output");
  c.exportResolution = rd.integer(o, "export_resolution", "output", 9);
  atLeast(c.exportResolution, 2, "output.export_resolution");
  c.exportVtk = rd.flag(o, "vtk", "output", true);
  c.clearanceStations = rd.numbers(o, "clearance_stations", "output", {0.9 * c.length});
  for (double z : c.clearanceStations)
    require(z >= 0.0 && z <= c.length, ErrorKind::Config, "output.clearance_stations must lie within [0, length]");
  c.clearanceResolution = rd.integer(o, "clearance_resolution", "output", 2048);
  atLeast(c.clearanceResolution, 16, "output.clearance_resolution");
  c.t0Sensitivity = rd.numbers(o, "t0_sensitivity", "output", {20.0, 70.0});
  echo["output"] = json{{"export_resolution", c.exportResolution},
                        {"vtk", c.exportVtk},
                        {"clearance_stations", c.clearanceStations},
                        {"clearance_resolution", c.clearanceResolution},
                        {"t0_sensitivity", c.t0Sensitivity}};

  c.resolved = echo;
  return c;
}

PipelineConfig parseConfig(const std::string& path, bool strict) {
  require(fs::exists(path), ErrorKind::Config, "missing config file " + path);
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const fs::path abs = fs::absolute(path);
  return parseConfigText(ss.str(), abs.parent_path().string(), strict);
}

// ---------------------------------------------------------------------------
// Synthetic clouds
// ---------------------------------------------------------------------------

PointCloud2D syntheticMaleCloud() {
  constexpr int n = 2572;
  PointCloud2D c;
  c.closed = true;
  for (int i = 0; i < n; ++i) {
    const double phi = 2.0 * kPi * i / n;
    const double r = 50.97 - 21.0 * std::abs(std::sin(2.0 * phi));
    c.points.emplace_back(r * std::cos(phi), r * std::sin(phi));
  }
  c.corners = {0, n / 4, n / 2, 3 * n / 4};
  return c;
}

PointCloud2D syntheticFemaleCloud(double axisDistance) {
  constexpr int n = 2292;
  PointCloud2D c;
  c.closed = true;
  for (int i = 0; i < n; ++i) {
    const double psi = kPi + 2.0 * kPi * i / n;
    const double r = 28.93 + 7.535 * (1.0 - std::cos(6.0 * (psi - kPi)));
    c.points.emplace_back(axisDistance + r * std::cos(psi), r * std::sin(psi));
  }
  return c;
}

void writeSyntheticClouds(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::Io, "cannot create directory " + dir);
  savePointCloud(syntheticMaleCloud(), (fs::path(dir) / "male.txt").string());
  savePointCloud(syntheticFemaleCloud(), (fs::path(dir) / "female.txt").string());
}

double maxRadius(const TensorPatch& curve, const Eigen::Vector2d& center) {
  require(curve.parDim() == 1 && curve.geoDim() == 2, ErrorKind::Geometry, "maxRadius needs a planar curve");
  auto radius = [&](double t) {
    const double p[1] = {std::clamp(t, 0.0, 1.0)};
    return (curve.eval(p).head<2>() - center).norm();
  };
  constexpr int n = 8192;
  int best = 0;
  double bestR = -1.0;
  for (int i = 0; i <= n; ++i) {
    const double r = radius(static_cast<double>(i) / n);
    if (r > bestR) {
      bestR = r;
      best = i;
    }
  }
  double a = std::max(0.0, (best - 1.0) / n), b = std::min(1.0, (best + 1.0) / n);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = radius(x1), f2 = radius(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 > f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = radius(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = radius(x2);
    }
  }
  return std::max({bestR, f1, f2, radius(a), radius(b)});
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

void writeJson(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

std::string stationTag(double z) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "z%.6g", z);
  return buf;
}

struct Context {
  const PipelineConfig& cfg;
  fs::path out;
  json& manifest;

  std::string file(const std::string& name) const { return (out / name).string(); }
  void timing(const std::string& key, double s) { manifest["timings"][key] = s; }
};

void fitStage(Context& ctx) {
  const auto& cfg = ctx.cfg;
  json report;
  report["kind"] = cfg.kind;
  if (cfg.kind == "bar") {
    report["note"] = "bar geometry is built directly; no profile fitting";
    writeJson(report, ctx.out / "fit_report.json");
    ctx.manifest["results"]["fit"] = report;
    return;
  }
  for (const auto& rc : cfg.rotors) {
    PointCloud2D cloud = loadPointCloud(rc.cloud);
    ctx.manifest["inputs"][rc.name + "_cloud"] = json{{"path", rc.cloud}, {"digest", fileDigest(rc.cloud)}};
    if (rc.corners)
      cloud.corners = *rc.corners;
    for (int k : cloud.corners)
      require(k < static_cast<int>(cloud.points.size()), ErrorKind::Config,
              "geometry." + rc.name + ".corners: index " + std::to_string(k) + " exceeds the cloud size");
    FitOptions fo;
    fo.degree = cfg.fitDegree;
    fo.tolerance = cfg.fitTolerance;
    fo.maxControlPoints = cfg.maxControlPoints;
    const auto t0 = Clock::now();
    FitResult r = fitCurve(cloud, fo);
    ctx.timing("fit." + rc.name, seconds(t0));
    MultiPatchModel m;
    m.name = rc.name + "_curve";
    m.patches.push_back(r.curve);
    saveGeometry(m, ctx.file(rc.name + "_curve.geo"));
    report[rc.name] = json{{"points", cloud.points.size()},
                           {"corners", cloud.corners},
                           {"degree", r.report.degree},
                           {"control_points", r.report.controlPointCount},
                           {"max_deviation_um", r.report.maxDeviation * 1e3},
                           {"tolerance_um", cfg.fitTolerance * 1e3},
                           {"iterations", r.report.iterations},
                           {"max_radius_mm", maxRadius(r.curve, rc.center)}};
  }
  writeJson(report, ctx.out / "fit_report.json");
  ctx.manifest["results"]["fit"] = report;
}

json modelSummary(const MultiPatchModel& m, const ValidationReport& vr) {
  int controls = 0;
  for (const auto& p : m.patches)
    controls += p.controlCount();
  return json{{"patches", m.patches.size()},
              {"elements", m.elementCount()},
              {"control_points", controls},
              {"declared_singularities", vr.count(FindingKind::DeclaredSingularity)},
              {"interface_mismatches", vr.count(FindingKind::InterfaceMismatch)},
              {"nonpositive_jacobians", vr.count(FindingKind::NonPositiveJacobian)}};
}

void checkValid(const std::string& part, const ValidationReport& vr) {
  if (vr.ok())
    return;
  for (const auto& f : vr.findings)
    if (f.kind != FindingKind::DeclaredSingularity)
      fail(ErrorKind::Geometry, part + " model failed validation: " + f.message);
}

void meshStage(Context& ctx) {
  const auto& cfg = ctx.cfg;
  json report;
  if (cfg.kind == "bar") {
    const auto t0 = Clock::now();
    MultiPatchModel bar = buildBox(Eigen::VectorXd(cfg.barSize), cfg.barDegree, cfg.barSpans);
    bar.name = "bar";
    const auto vr = validateModel(bar);
    checkValid("bar", vr);
    saveGeometry(bar, ctx.file("bar.geo"));
    ctx.timing("mesh.bar", seconds(t0));
    report["bar"] = modelSummary(bar, vr);
  } else {
    std::vector<double> bores;
    for (const auto& rc : cfg.rotors) {
      const auto t0 = Clock::now();
      const MultiPatchModel curveModel = loadGeometry(ctx.file(rc.name + "_curve.geo"));
      require(curveModel.patches.size() == 1 && curveModel.parDim() == 1 && curveModel.geoDim() == 2,
              ErrorKind::Geometry, rc.name + "_curve.geo does not hold a single planar curve");
      const TensorPatch& curve = curveModel.patches.front();
      ScaledBoundaryOptions so;
      so.coreRadius = rc.coreRadius;
      so.radialDegree = cfg.rotorDegree;
      const MultiPatchModel section = buildScaledBoundary(curve, rc.center, so);
      LoftOptions lo;
      lo.length = cfg.length;
      lo.pitchDegrees = rc.pitchDegrees;
      lo.layers = cfg.layers;
      lo.axialDegree = cfg.rotorDegree;
      lo.shaftLength = cfg.shaftLength;
      lo.axis = rc.center;
      MultiPatchModel rotor = loftTwisted(section, lo).refined(cfg.rotorRefine);
      rotor.name = rc.name;
      const auto vr = validateModel(rotor);
      checkValid(rc.name, vr);
      saveGeometry(rotor, ctx.file(rc.name + ".geo"));
      ctx.timing("mesh." + rc.name, seconds(t0));
      const double rmax = maxRadius(curve, rc.center);
      bores.push_back(rc.bore > 0.0 ? rc.bore : rmax + cfg.clearance);
      report[rc.name] = modelSummary(rotor, vr);
      report[rc.name]["max_radius_mm"] = rmax;
      report[rc.name]["bore_mm"] = bores.back();
      if (bores.back() <= rmax)
        ctx.manifest["warnings"].push_back(rc.name + " bore does not clear the fitted profile");
    }
    if (cfg.casing) {
      const auto t0 = Clock::now();
      CasingOptions co;
      co.degree = cfg.casingDegree;
      const MultiPatchModel section = buildCasing(bores[0], bores[1], cfg.axisDistance, cfg.casingThickness, co);
      LoftOptions lo;
      lo.length = cfg.length;
      lo.layers = cfg.casingLayers;
      lo.axialDegree = cfg.casingDegree;
      MultiPatchModel casing = extrude(section, lo).refined(cfg.casingRefine);
      casing.name = "casing";
      const auto vr = validateModel(casing);
      checkValid("casing", vr);
      saveGeometry(casing, ctx.file("casing.geo"));
      ctx.timing("mesh.casing", seconds(t0));
      report["casing"] = modelSummary(casing, vr);
    }
  }
  writeJson(report, ctx.out / "mesh_report.json");
  ctx.manifest["results"]["mesh"] = report;
}

TemperatureField temperatureFor(const PipelineConfig& cfg, const std::string& part,
                                std::shared_ptr<const MultiPatchModel> model, const ThermoelasticOptions& opts) {
  if (cfg.temperatureMode == "uniform")
    return TemperatureField::uniform(cfg.Tuniform);
  const auto axial = TemperatureField::linearAxial(0.0, cfg.length, cfg.Tlow, cfg.Thigh, 2);
  if (part != "casing")
    return axial;
  const auto outer = TemperatureField::uniform(cfg.Tlow);
  if (cfg.temperatureMode == "solve-laplace")
    return TemperatureField::discrete(
        solveSteadyTemperature(model, {{"casingInner", axial}, {"casingOuter", outer}}, opts));
  return TemperatureField::throughThickness(axial, outer, 0);
}

json measure(const PipelineConfig& cfg, const std::string& part, const DiscreteField& u) {
  json j;
  if (part == "bar") {
    const auto e = axialElongation(u, "zHigh");
    j["elongation_max_um"] = e.maxUm;
    j["elongation_mean_um"] = e.meanUm;
  } else if (part == "casing") {
    const auto s = surfaceDisplacement(u, "casingInner", outwardNormalDirection());
    j["inward_max_um"] = s.max * 1e3;
    j["inward_mean_um"] = s.mean * 1e3;
  } else {
    const Eigen::Vector2d center = part == "male" ? cfg.rotors[0].center : cfg.rotors[1].center;
    const auto body = axialElongation(u, "bodyHighPressureEnd");
    const auto total = axialElongation(u, "highPressureEnd");
    const auto radial = surfaceDisplacement(u, "lateral", radialDirection(center));
    j["body_elongation_max_um"] = body.maxUm;
    j["body_elongation_mean_um"] = body.meanUm;
    j["total_elongation_max_um"] = total.maxUm;
    j["total_elongation_mean_um"] = total.meanUm;
    j["radial_max_um"] = radial.max * 1e3;
    j["radial_mean_um"] = radial.mean * 1e3;
  }
  return j;
}

void solveStage(Context& ctx) {
  const auto& cfg = ctx.cfg;
  json report;
  ThermoelasticOptions opts;
  opts.assembly.quadraturePoints = cfg.quadraturePoints;
  opts.solver = cfg.solver;
  for (const auto& part : partNames(cfg)) {
    const auto t0 = Clock::now();
    auto model = std::make_shared<const MultiPatchModel>(loadGeometry(ctx.file(part + ".geo")));
    const auto& bcs = cfg.bcs.at(part);
    bcs.validate(*model);
    ThermoelasticProblem problem(model, cfg.material, bcs, opts);
    const TemperatureField T = temperatureFor(cfg, part, model, opts);
    SolveReport sr;
    const DiscreteField u = problem.solve(T, &sr);
    saveField(u, ctx.file(part + ".disp"));
    if (cfg.exportVtk) {
      ExportField ef;
      ef.displacement = &u;
      ef.temperature = &T;
      exportVtk(*model, ef, cfg.exportResolution, ctx.file(part + ".vtk"));
    }
    ctx.manifest["dofs"][part] = problem.space().freeCount();
    ctx.manifest["residuals"][part] = sr.relativeResidual;
    ctx.timing("solve." + part + ".assembly", problem.assemblySeconds());
    ctx.timing("solve." + part + ".factorization", problem.factorSeconds());

    json pj = measure(cfg, part, u);
    pj["solver"] = sr.method;
    pj["iterations"] = sr.iterations;
    pj["temperature"] = T.description();
    pj["bcs"] = cfg.bcModes.count(part) ? json(cfg.bcModes.at(part)) : json::object();
    if (part == "bar")
      pj["max_total_stress"] = maxTotalStress(u, cfg.material, T);
    for (const auto& w : problem.warnings())
      ctx.manifest["warnings"].push_back(part + ": " + w);

    json table = json::array();
    for (double T0 : cfg.t0Sensitivity) {
      const DiscreteField v = problem.solve(T, nullptr, T0);
      json row = measure(cfg, part, v);
      row["T0"] = T0;
      table.push_back(row);
    }
    pj["t0_sensitivity"] = table;
    report[part] = pj;
    ctx.timing("solve." + part, seconds(t0));
  }

  if (cfg.kind == "compressor") {
    // Published figures for the reference configuration, in micrometres.
    const json reference = {{"male_body_elongation_um", 317.0},   {"male_total_elongation_um", 370.0},
                            {"female_body_elongation_um", 251.0}, {"female_total_elongation_um", 300.0},
                            {"male_radial_um", 92.0},             {"female_radial_um", 79.0},
                            {"casing_inward_um", 12.0}};
    json computed;
    for (const char* r : {"male", "female"}) {
      computed[std::string(r) + "_body_elongation_um"] = report[r]["body_elongation_max_um"];
      computed[std::string(r) + "_total_elongation_um"] = report[r]["total_elongation_max_um"];
      computed[std::string(r) + "_radial_um"] = report[r]["radial_max_um"];
    }
    if (cfg.casing)
      computed["casing_inward_um"] = report["casing"]["inward_max_um"];
    json delta;
    for (auto it = computed.begin(); it != computed.end(); ++it)
      delta[it.key()] = it->get<double>() - reference[it.key()].get<double>();
    report["comparison"] = json{{"reference", reference}, {"computed", computed}, {"delta", delta}};
    const double clearanceUm = cfg.clearance * 1e3;
    const double male = report["male"]["radial_max_um"], female = report["female"]["radial_max_um"];
    json q{{"radial_exceeds_clearance", male > clearanceUm && female > clearanceUm},
           {"male_radial_exceeds_female", male > female}};
    if (cfg.casing)
      q["casing_moves_inward"] = report["casing"]["inward_max_um"].get<double>() > 0.0;
    report["qualitative"] = q;
  }
  writeJson(report, ctx.out / "solve_report.json");
  ctx.manifest["results"]["solve"] = report;
}

void clearanceStage(Context& ctx) {
  const auto& cfg = ctx.cfg;
  std::ostringstream table;
  table << "pair,z_mm,min_gap_before_um,min_gap_after_um,contraction_percent,closed\n";
  json report = json::array();
  if (cfg.kind == "compressor") {
    struct Part {
      std::shared_ptr<const MultiPatchModel> model;
      DiscreteField u;
    };
    std::map<std::string, Part> parts;
    for (const auto& name : partNames(cfg)) {
      auto model = std::make_shared<const MultiPatchModel>(loadGeometry(ctx.file(name + ".geo")));
      const std::string disp = ctx.file(name + ".disp");
      require(fs::exists(disp), ErrorKind::Io, "missing solution artifact " + disp);
      parts[name] = {model, loadField(model, disp)};
    }
    struct Pair {
      std::string a, aBoundary, b, bBoundary;
    };
    std::vector<Pair> pairs;
    if (cfg.casing) {
      pairs.push_back({"male", "lateral", "casing", "casingInner"});
      pairs.push_back({"female", "lateral", "casing", "casingInner"});
    }
    pairs.push_back({"male", "lateral", "female", "lateral"});

    for (double z : cfg.clearanceStations) {
      for (const auto& p : pairs) {
        const auto t0 = Clock::now();
        const Part& A = parts.at(p.a);
        const Part& B = parts.at(p.b);
        const int res = cfg.clearanceResolution;
        const BoundarySampler a0(A.model, p.aBoundary, std::nullopt, 1.0, z, res);
        const BoundarySampler b0(B.model, p.bBoundary, std::nullopt, 1.0, z, res);
        const BoundarySampler a1(A.model, p.aBoundary, A.u, 1.0, z, res);
        const BoundarySampler b1(B.model, p.bBoundary, B.u, 1.0, z, res);
        const ClearanceProfile before = clearanceProfile(a0, b0);
        const ClearanceProfile after = clearanceProfile(a1, b1);
        const Contraction con = contractionPercent(before, after);
        const std::string tag = p.a + "_" + p.b + "_" + stationTag(z);
        writeClearanceCsv(before, ctx.file("clearance_" + tag + "_before.csv"));
        writeClearanceCsv(after, ctx.file("clearance_" + tag + "_after.csv"));

        const auto tight = std::min_element(before.gaps.begin(), before.gaps.end()) - before.gaps.begin();
        const double minBefore = before.minGap() * 1e3;
        const double minAfter = after.minGap() * 1e3;
        const double percent = con.flagged[tight] ? std::nan("") : con.percent[tight];
        char line[256];
        std::snprintf(line, sizeof line, "%s-%s,%.17g,%.17g,%.17g,%.17g,%d\n", p.a.c_str(), p.b.c_str(), z,
                      minBefore, minAfter, percent, minAfter <= 0.0 ? 1 : 0);
        table << line;
        json r{{"pair", p.a + "-" + p.b},
               {"z_mm", z},
               {"min_gap_before_um", minBefore},
               {"min_gap_after_um", minAfter},
               {"closed", minAfter <= 0.0}};
        r["contraction_percent"] = std::isnan(percent) ? json(nullptr) : json(percent);
        report.push_back(r);
        ctx.timing("clearance." + tag, seconds(t0));
      }
    }
  }
  std::ofstream out(ctx.out / "contraction.csv", std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + ctx.file("contraction.csv"));
  out << table.str();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + ctx.file("contraction.csv"));
  ctx.manifest["results"]["clearance"] = report;
}

int exitCodeFor(ErrorKind k) {
  if (k == ErrorKind::InvalidArgument)
    return 2;
  return static_cast<int>(k);
}

const char* kindName(ErrorKind k) {
  switch (k) {
  case ErrorKind::InvalidArgument:
    return "invalid-argument";
  case ErrorKind::Config:
    return "config";
  case ErrorKind::Geometry:
    return "geometry";
  case ErrorKind::Assembly:
    return "assembly";
  case ErrorKind::Solver:
    return "solver";
  case ErrorKind::Io:
    return "io";
  }
  return "internal";
}

} // namespace

RunResult runPipeline(const std::string& stage, const std::string& configPath, const RunOptions& options) {
  RunResult result;
  json& manifest = result.manifest;
  manifest["tool"] = "screwiga";
  manifest["version"] = SCREWIGA_VERSION;
  manifest["stage"] = stage;
  manifest["threads"] = options.threads;
  manifest["strict"] = options.strict;
  manifest["inputs"] = json::object();
  manifest["timings"] = json::object();
  manifest["dofs"] = json::object();
  manifest["residuals"] = json::object();
  manifest["results"] = json::object();
  manifest["warnings"] = json::array();

  const fs::path out(options.outDir.empty() ? "." : options.outDir);
  bool outReady = false;
  const auto start = Clock::now();
  try {
    static const std::set<std::string> stages{"fit", "mesh", "solve", "clearance", "all"};
    require(stages.count(stage) > 0, ErrorKind::InvalidArgument,
            "unknown stage '" + stage + "' (fit, mesh, solve, clearance, all)");
    std::error_code ec;
    fs::create_directories(out, ec);
    require(!ec && fs::is_directory(out), ErrorKind::Io, "cannot create output directory " + out.string());
    outReady = true;
    if (options.threads > 0)
      setThreadCount(options.threads);

    const PipelineConfig cfg = parseConfig(configPath, options.strict);
    manifest["config"] = cfg.resolved;
    manifest["inputs"]["config"] = json{{"digest", fileDigest(configPath)}};
    for (const auto& w : cfg.warnings)
      manifest["warnings"].push_back(w);

    Context ctx{cfg, out, manifest};
    auto run = [&](const char* name, void (*fn)(Context&)) {
      const auto t0 = Clock::now();
      fn(ctx);
      ctx.timing(name, seconds(t0));
    };
    if (stage == "fit" || stage == "all")
      run("fit", fitStage);
    if (stage == "mesh" || stage == "all")
      run("mesh", meshStage);
    if (stage == "solve" || stage == "all")
      run("solve", solveStage);
    if (stage == "clearance" || stage == "all")
      run("clearance", clearanceStage);
    manifest["status"] = "ok";
    result.exitCode = 0;
  } catch (const Error& e) {
    result.exitCode = exitCodeFor(e.kind());
    result.message = e.what();
    manifest["status"] = "error";
    manifest["error"] = json{{"kind", kindName(e.kind())}, {"exit_code", result.exitCode}, {"message", e.what()}};
  } catch (const std::exception& e) {
    result.exitCode = 1;
    result.message = std::string("internal error: ") + e.what();
    manifest["status"] = "error";
    manifest["error"] = json{{"kind", "internal"}, {"exit_code", 1}, {"message", result.message}};
  }
  manifest["timings"]["total"] = seconds(start);
  if (outReady) {
    try {
      writeJson(manifest, out / "manifest.json");
    } catch (const Error& e) {
      if (result.exitCode == 0) {
        result.exitCode = exitCodeFor(e.kind());
        result.message = e.what();
      }
    }
  }
  return result;
}

} // namespace screwiga
