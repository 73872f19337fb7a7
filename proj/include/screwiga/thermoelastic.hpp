#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "screwiga/discretize.hpp"
#include "screwiga/material.hpp"

namespace screwiga {

/// Temperature in degrees Celsius, evaluable at any point of a model.
class TemperatureField {
public:
  TemperatureField() = default;

  static TemperatureField uniform(double T);
  /// Linear in coordinate `axis` between (z0, Tlow) and (z1, Thigh), held constant outside.
  static TemperatureField linearAxial(double z0, double z1, double Tlow, double Thigh, int axis = 2);
  /// Blend inner(x) (1 - s) + outer(x) s with s the parameter of direction `direction`.
  static TemperatureField throughThickness(TemperatureField inner, TemperatureField outer, int direction = 0);
  static TemperatureField discrete(DiscreteField field);

  double operator()(int patch, std::span<const double> params, const Eigen::VectorXd& x) const;
  ScalarFunction function(double shift = 0.0) const;
  const std::string& description() const { return description_; }
  bool valid() const { return static_cast<bool>(fn_); }

private:
  ScalarFunction fn_;
  std::string description_;
};

struct BoundaryConditionSet {
  std::vector<std::string> fixed;     ///< u = 0
  std::vector<std::string> sliding;   ///< lateral components 0, axial free
  std::vector<std::string> roller;    ///< axial component 0, lateral free
  std::vector<std::string> free;      ///< recorded only
  std::vector<std::pair<std::string, Eigen::VectorXd>> tractions;
  std::vector<VertexPin> pins;
  int axialComponent = -1;            ///< -1 selects the last coordinate

  std::vector<DirichletSpec> dirichlet(int dim) const;
  /// Throws on a boundary listed twice or a traction on a constrained boundary.
  void validate(const MultiPatchModel& model) const;
};

struct ThermoelasticOptions {
  AssemblyOptions assembly;
  SolverOptions solver;
};

/// Assembled and factorized elasticity problem; solves for any number of temperature fields.
class ThermoelasticProblem {
public:
  ThermoelasticProblem(std::shared_ptr<const MultiPatchModel> model, const Material& material,
                       const BoundaryConditionSet& bcs, const ThermoelasticOptions& options = {});
  ~ThermoelasticProblem();

  /// Displacement in mm. T0 overrides the material reference temperature when given.
  DiscreteField solve(const TemperatureField& temperature, SolveReport* report = nullptr,
                      std::optional<double> T0 = std::nullopt) const;

  const DiscreteSpace& space() const { return *space_; }
  std::shared_ptr<const DiscreteSpace> spacePtr() const { return space_; }
  const Material& material() const { return material_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  double assemblySeconds() const { return assemblySeconds_; }
  double factorSeconds() const { return factorSeconds_; }

private:
  std::shared_ptr<const MultiPatchModel> model_;
  Material material_;
  ThermoelasticOptions options_;
  std::shared_ptr<const DiscreteSpace> space_;
  LinearSystem system_;
  Eigen::VectorXd tractionLoad_;
  std::unique_ptr<SpdSolver> solver_;
  std::vector<std::string> warnings_;
  double assemblySeconds_ = 0.0;
  double factorSeconds_ = 0.0;
};

DiscreteField solveThermoelastic(std::shared_ptr<const MultiPatchModel> model, const Material& material,
                                 const TemperatureField& temperature, const BoundaryConditionSet& bcs,
                                 const ThermoelasticOptions& options = {}, SolveReport* report = nullptr);

/// Steady temperature from Dirichlet data on named boundaries (kappa = 1).
DiscreteField solveSteadyTemperature(std::shared_ptr<const MultiPatchModel> model,
                                     const std::vector<std::pair<std::string, TemperatureField>>& data,
                                     const ThermoelasticOptions& options = {});

/// Largest entry magnitude of sigma(eps(u) - eps_T) over all quadrature points.
double maxTotalStress(const DiscreteField& displacement, const Material& material, const TemperatureField& temperature,
                      int pointsPerDirection = 0);

} // namespace screwiga
