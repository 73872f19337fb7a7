#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "screwiga/discretize.hpp"
#include "screwiga/thermoelastic.hpp"

namespace screwiga {

/// Displacement (mm) at patch parameters.
Eigen::VectorXd evalDisplacement(const DiscreteField& field, int patch, std::span<const double> params);

struct Elongation {
  double maxUm = 0.0;
  double meanUm = 0.0;    ///< area weighted
};

/// Axial displacement over a named face. axialComponent -1 selects the last coordinate.
Elongation axialElongation(const DiscreteField& field, const std::string& face, int axialComponent = -1);

struct SurfaceStats {
  double max = 0.0;
  double min = 0.0;
  double mean = 0.0;      ///< area weighted
};

/// Direction at a boundary point given its position and outward unit normal.
using DirectionFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& normal)>;

/// Statistics of u . direction over a boundary, in mm. Max and min combine a uniform
/// sample grid with the quadrature points.
SurfaceStats surfaceDisplacement(const DiscreteField& field, const std::string& boundary,
                                 const DirectionFunction& direction, int resolution = 33);

/// Radial direction in the xy plane about `center`.
DirectionFunction radialDirection(const Eigen::Vector2d& center);
/// Outward normal of the boundary.
DirectionFunction outwardNormalDirection();

/// Planar boundary curve pieces of a 2D model, or the z = station cross-section of the
/// lateral sides of a 3D model, optionally displaced by scale * u.
class BoundarySampler {
public:
  BoundarySampler(std::shared_ptr<const MultiPatchModel> model, const std::string& boundary,
                  std::optional<DiscreteField> displacement = std::nullopt, double scale = 1.0,
                  std::optional<double> zStation = std::nullopt, int resolution = 2048);

  int pieceCount() const { return static_cast<int>(pieces_.size()); }
  int resolution() const { return resolution_; }

  /// Displaced point in the section plane at piece parameter t in [0, 1].
  Eigen::Vector2d point(int piece, double t) const;
  /// Undeformed point.
  Eigen::Vector2d referencePoint(int piece, double t) const;
  /// Outward unit normal of the material in the section plane (undeformed geometry).
  Eigen::Vector2d normal(int piece, double t) const;

  struct Sample {
    int piece;
    double t;
    Eigen::Vector2d x;
  };
  /// Per piece, in increasing t: resolution uniform parameters plus the knot breaks of the
  /// tangential direction, so corners are sampled exactly.
  const std::vector<Sample>& samples() const { return samples_; }
  /// [first, last) indices of a piece in samples().
  std::pair<std::size_t, std::size_t> pieceRange(int piece) const {
    return {offsets_[piece], offsets_[piece + 1]};
  }

private:
  struct Piece {
    SideRef side;
    int along;               // tangential parameter direction walked by t
    int axial = -1;          // parameter direction solved for the z station (3D)
  };
  std::array<double, 3> params(int piece, double t) const;

  std::shared_ptr<const MultiPatchModel> model_;
  std::optional<DiscreteField> displacement_;
  double scale_ = 1.0;
  std::optional<double> station_;
  int resolution_ = 2048;
  std::vector<Piece> pieces_;
  std::vector<Sample> samples_;
  std::vector<std::size_t> offsets_;
};

struct ClearanceProfile {
  std::vector<double> stations;     ///< mm of arc length along the reference curve of a
  std::vector<double> gaps;         ///< mm, negative = interpenetration
  std::vector<Eigen::Vector2d> points;
  /// Smallest gap after refinement between samples; +inf when not computed.
  double refinedMin = std::numeric_limits<double>::infinity();

  double minGap() const;
};

/// Signed distance from each sample of a to b: positive when the point of a lies on the
/// non-material side of b.
ClearanceProfile clearanceProfile(const BoundarySampler& a, const BoundarySampler& b);

struct Contraction {
  std::vector<double> percent;      ///< NaN where flagged
  std::vector<bool> flagged;        ///< before <= 0
};

Contraction contractionPercent(const ClearanceProfile& before, const ClearanceProfile& after);

struct ExportField {
  const DiscreteField* displacement = nullptr;
  const TemperatureField* temperature = nullptr;
};

/// Legacy ASCII unstructured grid with resolution^parDim points per patch.
void exportVtk(const MultiPatchModel& model, const ExportField& fields, int resolution, const std::string& path);

void writeClearanceCsv(const ClearanceProfile& profile, const std::string& path);

} // namespace screwiga
