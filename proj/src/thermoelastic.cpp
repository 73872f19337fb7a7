#include "screwiga/thermoelastic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "screwiga/error.hpp"

namespace screwiga {

Material materialFromEngineering(double E, double nu, double alpha, double T0) {
  require(E > 0.0, ErrorKind::InvalidArgument, "Young's modulus must be positive");
  require(nu > -1.0 && nu < 0.5, ErrorKind::InvalidArgument, "Poisson's ratio must lie in (-1, 0.5)");
  Material m;
  m.lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  m.mu = E / (2.0 * (1.0 + nu));
  m.alpha = alpha;
  m.T0 = T0;
  validateMaterial(m);
  return m;
}

void validateMaterial(const Material& m) {
  require(m.mu > 0.0, ErrorKind::InvalidArgument, "shear modulus must be positive");
  require(3.0 * m.lambda + 2.0 * m.mu > 0.0, ErrorKind::InvalidArgument, "bulk modulus must be positive");
  require(m.alpha >= 0.0, ErrorKind::InvalidArgument, "expansion coefficient must be non-negative");
  require(std::isfinite(m.T0), ErrorKind::InvalidArgument, "reference temperature must be finite");
}

Eigen::MatrixXd thermalStrain(const Material& m, double T, int dim) {
  require(dim >= 1 && dim <= 3, ErrorKind::InvalidArgument, "strain dimension must lie in [1, 3]");
  return m.alpha * (T - m.T0) * Eigen::MatrixXd::Identity(dim, dim);
}

Eigen::MatrixXd stress(const Material& m, const Eigen::MatrixXd& strain) {
  require(strain.rows() == strain.cols(), ErrorKind::InvalidArgument, "strain must be square");
  const double scale = std::max(1.0, strain.cwiseAbs().maxCoeff());
  require((strain - strain.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, ErrorKind::InvalidArgument,
          "strain must be symmetric");
  const auto n = strain.rows();
  return 2.0 * m.mu * strain + m.lambda * strain.trace() * Eigen::MatrixXd::Identity(n, n);
}

// ---------------------------------------------------------------------------
// Temperature fields
// ---------------------------------------------------------------------------

TemperatureField TemperatureField::uniform(double T) {
  TemperatureField f;
  f.fn_ = [T](int, std::span<const double>, const Eigen::VectorXd&) { return T; };
  f.description_ = "uniform " + std::to_string(T);
  return f;
}

TemperatureField TemperatureField::linearAxial(double z0, double z1, double Tlow, double Thigh, int axis) {
  require(z1 != z0, ErrorKind::InvalidArgument, "linear temperature needs z1 != z0");
  require(axis >= 0 && axis < 3, ErrorKind::InvalidArgument, "temperature axis must lie in [0, 2]");
  TemperatureField f;
  f.fn_ = [=](int, std::span<const double>, const Eigen::VectorXd& x) {
    require(axis < x.size(), ErrorKind::InvalidArgument, "temperature axis exceeds the point dimension");
    const double s = std::clamp((x[axis] - z0) / (z1 - z0), 0.0, 1.0);
    return Tlow + (Thigh - Tlow) * s;
  };
  std::ostringstream os;
  os << "linear-axial " << Tlow << " at " << z0 << " to " << Thigh << " at " << z1;
  f.description_ = os.str();
  return f;
}

TemperatureField TemperatureField::throughThickness(TemperatureField inner, TemperatureField outer, int direction) {
  require(inner.valid() && outer.valid(), ErrorKind::InvalidArgument, "blend needs two temperature fields");
  TemperatureField f;
  f.description_ = "through-thickness blend of (" + inner.description_ + ") and (" + outer.description_ + ")";
  f.fn_ = [in = std::move(inner), out = std::move(outer), direction](int patch, std::span<const double> u,
                                                                     const Eigen::VectorXd& x) {
    require(direction >= 0 && direction < static_cast<int>(u.size()), ErrorKind::InvalidArgument,
            "through-thickness blend needs patch parameters");
    const double s = u[direction];
    return (1.0 - s) * in(patch, u, x) + s * out(patch, u, x);
  };
  return f;
}

TemperatureField TemperatureField::discrete(DiscreteField field) {
  require(field.space != nullptr && field.space->components() == 1, ErrorKind::InvalidArgument,
          "discrete temperature needs a scalar field");
  TemperatureField f;
  f.description_ = "discrete field";
  f.fn_ = [fld = std::move(field)](int patch, std::span<const double> u, const Eigen::VectorXd&) {
    return fld.value(patch, u)[0];
  };
  return f;
}

double TemperatureField::operator()(int patch, std::span<const double> params, const Eigen::VectorXd& x) const {
  require(valid(), ErrorKind::InvalidArgument, "temperature field is empty");
  return fn_(patch, params, x);
}

ScalarFunction TemperatureField::function(double shift) const {
  require(valid(), ErrorKind::InvalidArgument, "temperature field is empty");
  if (shift == 0.0)
    return fn_;
  return [fn = fn_, shift](int p, std::span<const double> u, const Eigen::VectorXd& x) { return fn(p, u, x) + shift; };
}

// ---------------------------------------------------------------------------
// Boundary conditions
// ---------------------------------------------------------------------------

std::vector<DirichletSpec> BoundaryConditionSet::dirichlet(int dim) const {
  const int ax = axialComponent < 0 ? dim - 1 : axialComponent;
  require(ax < dim, ErrorKind::InvalidArgument, "axial component exceeds the dimension");
  std::vector<DirichletSpec> out;
  for (const auto& b : fixed)
    out.push_back({b, {true, true, true}, {}});
  for (const auto& b : sliding) {
    DirichletSpec s{b, {true, true, true}, {}};
    s.components[ax] = false;
    out.push_back(s);
  }
  for (const auto& b : roller) {
    DirichletSpec s{b, {false, false, false}, {}};
    s.components[ax] = true;
    out.push_back(s);
  }
  return out;
}

void BoundaryConditionSet::validate(const MultiPatchModel& model) const {
  std::set<std::string> seen;
  auto add = [&](const std::string& b) {
    model.boundary(b);
    require(seen.insert(b).second, ErrorKind::InvalidArgument, "boundary '" + b + "' has two displacement conditions");
  };
  for (const auto* list : {&fixed, &sliding, &roller, &free})
    for (const auto& b : *list)
      add(b);
  for (const auto& [b, t] : tractions) {
    model.boundary(b);
    require(std::find(fixed.begin(), fixed.end(), b) == fixed.end(), ErrorKind::InvalidArgument,
            "traction on fixed boundary '" + b + "'");
  }
}

// ---------------------------------------------------------------------------
// Solves
// ---------------------------------------------------------------------------

namespace {

double seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

ThermoelasticProblem::ThermoelasticProblem(std::shared_ptr<const MultiPatchModel> model, const Material& material,
                                           const BoundaryConditionSet& bcs, const ThermoelasticOptions& options)
    : model_(std::move(model)), material_(material), options_(options) {
  require(model_ != nullptr, ErrorKind::InvalidArgument, "thermoelastic solve needs a model");
  validateMaterial(material_);
  bcs.validate(*model_);
  const int d = model_->geoDim();
  const auto t0 = std::chrono::steady_clock::now();
  space_ = std::make_shared<DiscreteSpace>(model_, d, bcs.dirichlet(d), bcs.pins);
  for (int c = 0; c < d; ++c) {
    bool any = false;
    for (int s = 0; s < space_->scalarCount() && !any; ++s)
      any = space_->constrained(space_->globalDof(s, c));
    require(any, ErrorKind::InvalidArgument,
            "insufficient constraints: displacement component " + std::to_string(c) + " is never constrained");
  }
  system_ = assembleElasticity(*space_, material_.lambda, material_.mu, options_.assembly);
  warnings_ = system_.warnings;
  tractionLoad_ = Eigen::VectorXd::Zero(space_->freeCount());
  for (const auto& [b, t] : bcs.tractions)
    tractionLoad_ += assembleTractionLoad(*space_, b, t, options_.assembly);
  assemblySeconds_ = seconds(t0);
  const auto t1 = std::chrono::steady_clock::now();
  solver_ = std::make_unique<SpdSolver>(system_.matrix, options_.solver);
  factorSeconds_ = seconds(t1);
}

ThermoelasticProblem::~ThermoelasticProblem() = default;

DiscreteField ThermoelasticProblem::solve(const TemperatureField& temperature, SolveReport* report,
                                          std::optional<double> T0) const {
  const double ref = T0.value_or(material_.T0);
  Eigen::VectorXd rhs = system_.rhs + tractionLoad_ +
                        assembleThermalLoad(*space_, material_.lambda, material_.mu, material_.alpha, ref,
                                            temperature.function(), options_.assembly);
  return DiscreteField(space_, solver_->solve(rhs, report));
}

DiscreteField solveThermoelastic(std::shared_ptr<const MultiPatchModel> model, const Material& material,
                                 const TemperatureField& temperature, const BoundaryConditionSet& bcs,
                                 const ThermoelasticOptions& options, SolveReport* report) {
  ThermoelasticProblem problem(std::move(model), material, bcs, options);
  return problem.solve(temperature, report);
}

DiscreteField solveSteadyTemperature(std::shared_ptr<const MultiPatchModel> model,
                                     const std::vector<std::pair<std::string, TemperatureField>>& data,
                                     const ThermoelasticOptions& options) {
  require(!data.empty(), ErrorKind::InvalidArgument, "steady temperature needs Dirichlet data");
  std::vector<DirichletSpec> specs;
  for (const auto& [b, T] : data) {
    DirichletSpec s{b, {true, false, false}, {}};
    s.value = [T](const Eigen::VectorXd& x) {
      Eigen::VectorXd v(1);
      v[0] = T(-1, {}, x);
      return v;
    };
    specs.push_back(std::move(s));
  }
  auto space = std::make_shared<DiscreteSpace>(model, 1, specs);
  const LinearSystem sys = assembleLaplace(*space, 1.0, options.assembly);
  return DiscreteField(space, solve(sys, options.solver));
}

double maxTotalStress(const DiscreteField& displacement, const Material& material, const TemperatureField& temperature,
                      int pointsPerDirection) {
  const auto& model = displacement.space->model();
  const int d = model.geoDim();
  double worst = 0.0;
  forEachQuadraturePoint(model, pointsPerDirection, [&](const QuadraturePoint& q) {
    const Eigen::MatrixXd g = displacement.gradient(q.patch, q.params);
    const Eigen::MatrixXd eps = 0.5 * (g + g.transpose());
    const Eigen::MatrixXd s = stress(material, eps - thermalStrain(material, temperature(q.patch, q.params, q.x), d));
    worst = std::max(worst, s.cwiseAbs().maxCoeff());
  });
  return worst;
}

} // namespace screwiga
