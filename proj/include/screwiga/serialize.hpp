#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "screwiga/discretize.hpp"
#include "screwiga/geomgen.hpp"

namespace screwiga {

// Geometry text format, one token stream:
//
//   screwiga-geometry 1
//   name <word>
//   patches <count>
//   patch <i> pardim <d> geodim <g> rational <0|1>
//   knots <degree> <count> <values...>          (one line per direction)
//   controls <count>
//   <x> <y> [<z>] [<w>]                         (direction 0 fastest)
//   interfaces <count>
//   <patchA> <sideA> <patchB> <sideB> <flip0> <flip1>
//   boundaries <count>
//   <name> <count> <patch> <side> ...
//   degenerate <count> <patch> <side> ...
//   end
//
// Reals are written with 17 significant digits, so a write/read cycle is exact.

void writeGeometry(const MultiPatchModel& model, std::ostream& out);
std::string geometryToString(const MultiPatchModel& model);
MultiPatchModel readGeometry(std::istream& in);
void saveGeometry(const MultiPatchModel& model, const std::string& path);
/// Throws a geometry error naming the path when the artifact is missing.
MultiPatchModel loadGeometry(const std::string& path);

// Point clouds: one "x y" pair per line in mm; '#' starts a comment. Optional directive
// lines "closed <0|1>" and "corners <i> <j> ...".
PointCloud2D readPointCloud(std::istream& in);
PointCloud2D loadPointCloud(const std::string& path);
void savePointCloud(const PointCloud2D& cloud, const std::string& path);

// Coefficient files: "screwiga-field 1", component count, then per patch the local
// coefficients (controlCount rows of `components` reals).
void saveField(const DiscreteField& field, const std::string& path);
/// Rebuilds the field on an unconstrained space over `model`.
DiscreteField loadField(std::shared_ptr<const MultiPatchModel> model, const std::string& path);

/// 64-bit FNV-1a digest of a file, as 16 hex digits.
std::string fileDigest(const std::string& path);

} // namespace screwiga
