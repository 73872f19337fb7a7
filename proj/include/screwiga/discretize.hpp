#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "screwiga/geomgen.hpp"

namespace screwiga {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// Value of a boundary condition at a physical point; one entry per component.
using VectorFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd& x)>;

/// Field given per patch parameter point, e.g. a temperature. x is the physical point.
using ScalarFunction = std::function<double(int patch, std::span<const double> params, const Eigen::VectorXd& x)>;

struct DirichletSpec {
  std::string boundary;
  std::array<bool, 3> components{true, true, true};
  /// Empty means homogeneous data. Nonzero data is interpolated at the Greville points of
  /// each boundary side.
  VectorFunction value;
};

/// Constrains selected components of the control point located at `point`.
struct VertexPin {
  Eigen::VectorXd point;
  std::array<bool, 3> components{true, true, true};
};

/// Conforming multi-patch spline space with C0 interface coupling.
///
/// Global numbering is component blocked: dof = component * scalarCount + scalar index.
class DiscreteSpace {
public:
  DiscreteSpace(std::shared_ptr<const MultiPatchModel> model, int components,
                const std::vector<DirichletSpec>& dirichlet = {}, const std::vector<VertexPin>& pins = {});

  const MultiPatchModel& model() const { return *model_; }
  std::shared_ptr<const MultiPatchModel> modelPtr() const { return model_; }
  int components() const { return components_; }
  int scalarCount() const { return scalarCount_; }
  int totalCount() const { return components_ * scalarCount_; }
  int freeCount() const { return freeCount_; }
  int constrainedCount() const { return totalCount() - freeCount_; }

  int scalarIndex(int patch, int localFlat) const { return scalarOf_[patch][localFlat]; }
  int globalDof(int scalar, int component) const { return component * scalarCount_ + scalar; }
  /// -1 for constrained dofs.
  int freeIndex(int globalDof) const { return freeOf_[globalDof]; }
  bool constrained(int globalDof) const { return freeOf_[globalDof] < 0; }

  /// Prescribed values on constrained dofs, zero elsewhere (length totalCount).
  const Eigen::VectorXd& dirichletValues() const { return dirichletValues_; }

  /// Free coefficients to the full coefficient vector including prescribed values.
  Eigen::VectorXd expand(const Eigen::VectorXd& freeCoefs) const;
  /// Full-length vector restricted to the free dofs.
  Eigen::VectorXd restrict(const Eigen::VectorXd& full) const;

private:
  std::shared_ptr<const MultiPatchModel> model_;
  int components_ = 1;
  int scalarCount_ = 0;
  int freeCount_ = 0;
  std::vector<std::vector<int>> scalarOf_;
  std::vector<int> freeOf_;
  Eigen::VectorXd dirichletValues_;
};

struct DiscreteField {
  std::shared_ptr<const DiscreteSpace> space;
  Eigen::VectorXd coefficients;   ///< free dofs
  Eigen::VectorXd full;           ///< all dofs, prescribed values included

  DiscreteField() = default;
  DiscreteField(std::shared_ptr<const DiscreteSpace> s, Eigen::VectorXd freeCoefs);

  /// Patch-local coefficients: controlCount x components.
  Eigen::MatrixXd patchCoefficients(int patch) const;
  /// Value at patch parameters (push-forward of the linear combination).
  Eigen::VectorXd value(int patch, std::span<const double> params) const;
  /// components x geoDim physical gradient.
  Eigen::MatrixXd gradient(int patch, std::span<const double> params) const;
};

struct QuadratureRule {
  Eigen::MatrixXd nodes;        ///< parDim x count, on [0,1]^parDim
  Eigen::VectorXd weights;
};

/// Tensor-product Gauss-Legendre rule on the unit element.
QuadratureRule gaussRule(int pointsPerDirection, int parDim);

struct LinearSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  std::vector<std::string> warnings;
};

struct AssemblyOptions {
  int quadraturePoints = 0;     ///< per direction; 0 selects degree + 1
};

/// Stiffness matrix of the isotropic elasticity form on the free dofs. The rhs holds the
/// lifting of nonzero Dirichlet data (and nothing else).
LinearSystem assembleElasticity(const DiscreteSpace& space, double lambda, double mu, const AssemblyOptions& opts = {});

/// Stiffness of kappa * grad T . grad v on a scalar space, with Dirichlet lifting in the rhs.
LinearSystem assembleLaplace(const DiscreteSpace& space, double kappa, const AssemblyOptions& opts = {});

/// Free-dof vector of  int (2 mu + d lambda) alpha (T - T0) div v dx.
Eigen::VectorXd assembleThermalLoad(const DiscreteSpace& space, double lambda, double mu, double alpha, double T0,
                                    const ScalarFunction& temperature, const AssemblyOptions& opts = {});

/// Free-dof vector of  int f . v dx  for a body force f(x).
Eigen::VectorXd assembleBodyLoad(const DiscreteSpace& space, const VectorFunction& force, const AssemblyOptions& opts = {});

/// Free-dof vector of  int f . v ds  over a named boundary; f in N/mm^2.
Eigen::VectorXd assembleTractionLoad(const DiscreteSpace& space, const std::string& boundary,
                                     const Eigen::VectorXd& traction, const AssemblyOptions& opts = {});

/// Pressure p acting against the outward normal: int -p n . v ds.
Eigen::VectorXd assemblePressureLoad(const DiscreteSpace& space, const std::string& boundary, double pressure,
                                     const AssemblyOptions& opts = {});

enum class SolverMethod { Auto, Direct, ConjugateGradient };

struct SolverOptions {
  SolverMethod method = SolverMethod::Auto;
  int directLimit = 40000;      ///< Auto uses the direct solver up to this many unknowns
  double tolerance = 1e-10;     ///< relative residual contract
  int maxIterations = 20000;
};

struct SolveReport {
  std::string method;
  int iterations = 0;
  double relativeResidual = 0.0;
};

/// Factorized or preconditioned SPD operator; reusable for several right-hand sides.
class SpdSolver {
public:
  explicit SpdSolver(const SparseMatrix& matrix, const SolverOptions& opts = {});
  ~SpdSolver();
  SpdSolver(const SpdSolver&) = delete;
  SpdSolver& operator=(const SpdSolver&) = delete;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, SolveReport* report = nullptr) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Eigen::VectorXd solve(const LinearSystem& system, const SolverOptions& opts = {}, SolveReport* report = nullptr);

/// Quadrature point of a patch interior.
struct QuadraturePoint {
  int patch;
  std::span<const double> params;
  const Eigen::VectorXd& x;
  double weight;                 ///< includes |det J|
};

void forEachQuadraturePoint(const MultiPatchModel& model, int pointsPerDirection,
                            const std::function<void(const QuadraturePoint&)>& fn);

/// Quadrature point on a patch side, with the outward unit normal.
struct SideQuadraturePoint {
  int patch;
  int side;
  std::span<const double> params;
  const Eigen::VectorXd& x;
  const Eigen::VectorXd& normal;
  double weight;                 ///< includes the surface measure
};

void forEachSideQuadraturePoint(const MultiPatchModel& model, const SideRef& side, int pointsPerDirection,
                                const std::function<void(const SideQuadraturePoint&)>& fn);

struct ErrorNorms {
  double l2 = 0.0;
  double h1Semi = 0.0;
};

/// L2 and H1-seminorm distance to an exact field with gradient (components x geoDim).
ErrorNorms errorNorms(const DiscreteField& field, const VectorFunction& exact,
                      const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& exactGradient,
                      int pointsPerDirection = 0);

/// Writes the matrix in coordinate text form (1-based indices).
void writeMatrixMarket(const SparseMatrix& matrix, const std::string& path);

} // namespace screwiga
