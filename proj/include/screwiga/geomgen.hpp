#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "screwiga/splinecore.hpp"

namespace screwiga {

/// Ordered 2D profile samples in mm. A closed cloud does not repeat its first point.
struct PointCloud2D {
  std::vector<Eigen::Vector2d> points;
  bool closed = true;
  std::vector<int> corners;
};

struct FitOptions {
  int degree = 3;
  double tolerance = 4.4e-3;      ///< mm
  int maxControlPoints = 200;
  int initialSpans = 4;           ///< spans of the starting knot vector, spread over corner segments
  int maxParameterCorrections = 100;
};

struct FitReport {
  double maxDeviation = 0.0;      ///< mm
  int controlPointCount = 0;
  int degree = 0;
  int iterations = 0;
};

struct FitResult {
  TensorPatch curve;
  FitReport report;
};

/// Least-squares B-spline approximation with adaptive knot insertion. Marked corners get an
/// interior knot of multiplicity `degree` and are interpolated; closed clouds give a curve
/// whose first and last control points coincide.
FitResult fitCurve(const PointCloud2D& cloud, const FitOptions& options);

/// Largest distance from any cloud point to the curve.
double maxDeviation(const TensorPatch& curve, const std::vector<Eigen::Vector2d>& points);

/// Closest curve parameter to x, searched by dense sampling plus local refinement.
double closestParameter(const TensorPatch& curve, const Eigen::VectorXd& x, int samples = 2048);

/// Exact rational quadratic arc, counterclockwise from startAngle to endAngle (radians),
/// split into equal segments of at most 90 degrees. `segments` forces a segment count.
TensorPatch circularArc(const Eigen::Vector2d& center, double radius, double startAngle, double endAngle,
                        int segments = 0);

/// Patch side reference: side = 2*dir + {0: low, 1: high}.
struct SideRef {
  int patch = 0;
  int side = 0;
  bool operator==(const SideRef&) const = default;
  auto operator<=>(const SideRef&) const = default;
};

/// Two patch sides glued with coefficient-identical traces. flip[k] reverses the k-th
/// tangential direction of side B relative to side A.
struct Interface {
  SideRef a;
  SideRef b;
  std::array<bool, 2> flip{false, false};
};

/// Flat control indices of side `side` of p, with tangential directions reversed per flip,
/// ordered like TensorPatch::sideIndices.
std::vector<int> orientedSideIndices(const TensorPatch& p, int side, const std::array<bool, 2>& flip);

struct MultiPatchModel {
  std::string name;
  std::vector<TensorPatch> patches;
  std::vector<Interface> interfaces;
  std::map<std::string, std::vector<SideRef>> boundaries;
  /// Sides collapsed onto a lower-dimensional set (polar singularities).
  std::vector<SideRef> degenerateSides;

  int geoDim() const { return patches.empty() ? 0 : patches.front().geoDim(); }
  int parDim() const { return patches.empty() ? 0 : patches.front().parDim(); }
  const std::vector<SideRef>& boundary(const std::string& boundaryName) const;

  /// Uniform h-refinement of every patch; interfaces stay conforming.
  MultiPatchModel refined(int times) const;
  MultiPatchModel translated(const Eigen::VectorXd& offset) const;
  int elementCount() const;
};

/// Axis-aligned box [0, size] as one patch (1 to 3 dimensions). Boundaries are named
/// xLow, xHigh, yLow, yHigh, zLow, zHigh.
MultiPatchModel buildBox(const Eigen::VectorXd& size, int degree = 1, std::array<int, 3> spans = {1, 1, 1});

struct ScaledBoundaryOptions {
  double coreRadius = 0.0;        ///< 0 selects 40% of the smallest boundary distance
  int coreRadialSpans = 1;
  int outerRadialSpans = 2;
  int radialDegree = 3;
};

/// Two-patch cross-section: patch 0 is the central disk (polar, collapsed at the center),
/// patch 1 the outer layer ruled between the core circle and the closed boundary curve.
/// Parametric direction 0 is radial, direction 1 runs along the boundary.
MultiPatchModel buildScaledBoundary(const TensorPatch& boundary, const Eigen::Vector2d& center,
                                    const ScaledBoundaryOptions& options = {});

struct CasingOptions {
  int degree = 2;
  int radialSpans = 1;
};

/// Annular casing between the two-bore inner profile and its offset by `thickness`.
/// Bores are centred at (0,0) and (axisDistance,0). axisDistance == 0 gives one annulus.
MultiPatchModel buildCasing(double maleBore, double femaleBore, double axisDistance, double thickness,
                            const CasingOptions& options = {});

struct LoftOptions {
  double length = 168.3;          ///< mm
  double pitchDegrees = 0.0;      ///< total twist over the length
  int layers = 20;
  int axialDegree = 3;
  double shaftLength = 30.0;      ///< mm, 0 disables the shaft extensions
  int shaftSpans = 1;
  Eigen::Vector2d axis = Eigen::Vector2d::Zero();
};

/// Extrudes every patch of a planar model along z over [0, length] with control layers
/// rotated by pitch * z / length about `axis`.
MultiPatchModel extrude(const MultiPatchModel& crossSection, const LoftOptions& options);

/// Four-patch rotor from a scaled-boundary cross-section:
/// 0 outer layer, 1 low-pressure shaft, 2 central core, 3 high-pressure shaft.
MultiPatchModel loftTwisted(const MultiPatchModel& crossSection, const LoftOptions& options);

enum class FindingKind { InterfaceMismatch, NonPositiveJacobian, DeclaredSingularity, Topology };

struct Finding {
  FindingKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;
  int count(FindingKind kind) const;
  /// True when nothing but declared singularities was found.
  bool ok() const;
};

ValidationReport validateModel(const MultiPatchModel& model, int samplesPerDirection = 10);

const char* findingKindName(FindingKind kind);

} // namespace screwiga
