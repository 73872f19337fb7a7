#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace screwiga {

/// Largest supported polynomial degree.
inline constexpr int kMaxDegree = 10;

/// Nonzero basis functions at one parameter: values(k, j) is the k-th derivative of
/// basis function firstIndex + j.
struct BasisSpan {
  int firstIndex = 0;
  Eigen::MatrixXd values;
};

/// Clamped, non-decreasing knot sequence on [0, 1] together with its degree.
class KnotVector {
public:
  KnotVector() = default;
  KnotVector(int degree, std::vector<double> knots);

  /// Clamped knot vector with `spans` equal elements on [0, 1].
  static KnotVector uniform(int degree, int spans);

  int degree() const { return degree_; }
  const std::vector<double>& knots() const { return knots_; }
  int size() const { return static_cast<int>(knots_.size()); }
  int basisCount() const { return size() - degree_ - 1; }

  bool contains(double t) const { return t >= knots_.front() && t <= knots_.back(); }

  /// Index i with knots[i] <= t < knots[i+1]; t == 1 maps to the last non-empty span.
  int findSpan(double t) const;
  int multiplicity(double t) const;

  /// Distinct knot values, i.e. element boundaries.
  std::vector<double> breaks() const;
  int elementCount() const { return static_cast<int>(breaks().size()) - 1; }
  std::vector<double> greville() const;

  BasisSpan evalBasis(double t) const { return evalBasisDerivatives(t, 0); }
  BasisSpan evalBasisDerivatives(double t, int upTo) const;

  /// Allocation-free variant: out must hold (upTo+1)*(degree+1) values, row-major by
  /// derivative order. Returns the first active basis index. No domain check.
  int evalInto(double t, int upTo, double* out) const;

  /// Single basis function N_{i,p}(t) by the direct recursion.
  double basisFunction(int i, double t) const;

  KnotVector withInsertedKnot(double t) const;

  bool operator==(const KnotVector&) const = default;

private:
  int degree_ = 0;
  std::vector<double> knots_;
};

/// Tensor-product B-spline or NURBS map from [0,1]^parDim into R^geoDim.
///
/// Control points are stored flat with direction 0 running fastest. Polynomial patches
/// carry no weights at all; rational patches carry one positive weight per control point
/// and store the Cartesian (not the weighted) coordinates.
class TensorPatch {
public:
  TensorPatch() = default;
  TensorPatch(std::vector<KnotVector> knots, int geoDim, std::vector<double> coefs,
              std::vector<double> weights = {});

  int parDim() const { return static_cast<int>(knots_.size()); }
  int geoDim() const { return geoDim_; }
  bool rational() const { return !weights_.empty(); }

  const KnotVector& knots(int dir) const { return knots_[dir]; }
  const std::vector<KnotVector>& knotVectors() const { return knots_; }
  int count(int dir) const { return knots_[dir].basisCount(); }
  int controlCount() const;

  std::span<const double> controlPoint(int flat) const {
    return {coefs_.data() + static_cast<std::size_t>(flat) * geoDim_, static_cast<std::size_t>(geoDim_)};
  }
  double weight(int flat) const { return weights_.empty() ? 1.0 : weights_[flat]; }
  const std::vector<double>& coefs() const { return coefs_; }
  const std::vector<double>& weights() const { return weights_; }

  int flatIndex(const std::array<int, 3>& idx) const;
  std::array<int, 3> gridIndex(int flat) const;

  Eigen::VectorXd eval(std::span<const double> params) const;
  /// geoDim x parDim matrix of partial derivatives. Rank deficiency is reported through the
  /// values, never as an error.
  Eigen::MatrixXd jacobian(std::span<const double> params) const;

  TensorPatch insertKnot(int dir, double t) const;
  TensorPatch uniformRefine(int times) const;

  /// Flat indices of the control points on a side (side = 2*dir + {0: low, 1: high}),
  /// ordered by the remaining directions with the lowest one running fastest.
  std::vector<int> sideIndices(int side) const;
  /// Restriction of the map to a side as a (parDim-1)-variate patch.
  TensorPatch sidePatch(int side) const;

  /// Same knots and weights, new control point coordinates.
  TensorPatch withCoefs(std::vector<double> coefs) const;

  void checkParams(std::span<const double> params) const;

private:
  std::vector<KnotVector> knots_;
  int geoDim_ = 0;
  std::vector<double> coefs_;
  std::vector<double> weights_;
};

/// Active basis functions of a patch's (possibly rational) basis at one parameter point.
struct TensorBasisEval {
  std::vector<int> indices;          ///< flat control indices
  std::vector<double> values;        ///< R_a
  Eigen::MatrixXd grads;             ///< parDim x nActive parametric first derivatives
};

/// Evaluates the tensor-product basis (rational when the patch is) and, for order 1, its
/// parametric gradients. Reuses the storage of out.
void evalTensorBasis(const TensorPatch& patch, std::span<const double> params, int order,
                     TensorBasisEval& out);

/// Point and parametric derivatives of a curve (parDim 1) up to order upTo <= 2, rational
/// curves included. Entry k is the k-th derivative.
std::vector<Eigen::VectorXd> evalCurveDerivatives(const TensorPatch& curve, double t, int upTo);

} // namespace screwiga
