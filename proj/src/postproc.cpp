#include "screwiga/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <Eigen/Dense>

#include "screwiga/error.hpp"
#include "screwiga/parallel.hpp"

namespace screwiga {

namespace {

// Outward unit normal of a volume patch side at parameters u; empty at singular points.
std::optional<Eigen::VectorXd> sideNormal(const TensorPatch& patch, int side, std::span<const double> u) {
  const Eigen::MatrixXd J = patch.jacobian(u);
  if (J.rows() != J.cols())
    return std::nullopt;
  const double det = J.determinant();
  if (std::abs(det) < 1e-14)
    return std::nullopt;
  const Eigen::VectorXd m = J.transpose().inverse().col(side / 2);
  const double sign = (side % 2 == 0 ? -1.0 : 1.0) * (det > 0 ? 1.0 : -1.0);
  return Eigen::VectorXd(sign * m / m.norm());
}

int axialIndex(int component, int dim) {
  const int ax = component < 0 ? dim - 1 : component;
  require(ax >= 0 && ax < dim, ErrorKind::InvalidArgument, "axial component exceeds the dimension");
  return ax;
}

} // namespace

Eigen::VectorXd evalDisplacement(const DiscreteField& field, int patch, std::span<const double> params) {
  require(field.space != nullptr, ErrorKind::InvalidArgument, "field has no space");
  const auto& model = field.space->model();
  require(patch >= 0 && patch < static_cast<int>(model.patches.size()), ErrorKind::InvalidArgument,
          "patch index out of range");
  return field.value(patch, params);
}

SurfaceStats surfaceDisplacement(const DiscreteField& field, const std::string& boundary,
                                 const DirectionFunction& direction, int resolution) {
  require(resolution >= 2, ErrorKind::InvalidArgument, "sampling resolution must be at least 2");
  const auto& model = field.space->model();
  const auto& sides = model.boundary(boundary);
  SurfaceStats st;
  st.max = -std::numeric_limits<double>::infinity();
  st.min = std::numeric_limits<double>::infinity();
  double integral = 0.0, area = 0.0;
  auto visit = [&](double v) {
    st.max = std::max(st.max, v);
    st.min = std::min(st.min, v);
  };
  for (const auto& s : sides) {
    const auto& patch = model.patches[s.patch];
    forEachSideQuadraturePoint(model, s, 0, [&](const SideQuadraturePoint& q) {
      const double v = field.value(s.patch, q.params).dot(direction(q.x, q.normal));
      integral += q.weight * v;
      area += q.weight;
      visit(v);
    });
    const int pd = patch.parDim();
    const int dir = s.side / 2;
    std::vector<int> tang;
    for (int d = 0; d < pd; ++d)
      if (d != dir)
        tang.push_back(d);
    const int n1 = tang.size() > 1 ? resolution : 1;
    std::array<double, 3> u{};
    u[dir] = s.side % 2 == 0 ? 0.0 : 1.0;
    for (int j = 0; j < n1; ++j)
      for (int i = 0; i < resolution; ++i) {
        if (!tang.empty())
          u[tang[0]] = static_cast<double>(i) / (resolution - 1);
        if (tang.size() > 1)
          u[tang[1]] = static_cast<double>(j) / (resolution - 1);
        const std::span<const double> us(u.data(), pd);
        const auto n = sideNormal(patch, s.side, us);
        if (!n)
          continue;
        visit(field.value(s.patch, us).dot(direction(patch.eval(us), *n)));
      }
  }
  require(area > 0.0, ErrorKind::InvalidArgument, "boundary '" + boundary + "' has zero area");
  st.mean = integral / area;
  return st;
}

Elongation axialElongation(const DiscreteField& field, const std::string& face, int axialComponent) {
  const int d = field.space->model().geoDim();
  const int ax = axialIndex(axialComponent, d);
  require(field.space->components() == d, ErrorKind::InvalidArgument, "elongation needs a displacement field");
  const SurfaceStats st = surfaceDisplacement(field, face, [d, ax](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Unit(d, ax));
  });
  return {1e3 * st.max, 1e3 * st.mean};
}

DirectionFunction radialDirection(const Eigen::Vector2d& center) {
  return [center](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(x.size());
    r[0] = x[0] - center.x();
    r[1] = x[1] - center.y();
    const double n = r.norm();
    return n > 0.0 ? Eigen::VectorXd(r / n) : r;
  };
}

DirectionFunction outwardNormalDirection() {
  return [](const Eigen::VectorXd&, const Eigen::VectorXd& n) { return n; };
}

// ---------------------------------------------------------------------------
// Boundary sampling and clearances
// ---------------------------------------------------------------------------

BoundarySampler::BoundarySampler(std::shared_ptr<const MultiPatchModel> model, const std::string& boundary,
                                 std::optional<DiscreteField> displacement, double scale,
                                 std::optional<double> zStation, int resolution)
    : model_(std::move(model)), displacement_(std::move(displacement)), scale_(scale), station_(zStation),
      resolution_(resolution) {
  require(model_ != nullptr, ErrorKind::InvalidArgument, "sampler needs a model");
  require(resolution >= 2, ErrorKind::InvalidArgument, "sampler resolution must be at least 2");
  const int gd = model_->geoDim();
  require(model_->parDim() == gd && (gd == 2 || gd == 3), ErrorKind::InvalidArgument,
          "sampler needs a 2D or 3D volume model");
  if (displacement_) {
    require(displacement_->space != nullptr && displacement_->space->components() == gd, ErrorKind::InvalidArgument,
            "sampler displacement must be a vector field");
    require(displacement_->space->model().patches.size() == model_->patches.size(), ErrorKind::InvalidArgument,
            "sampler displacement lives on a different model");
  }
  for (const auto& s : model_->boundary(boundary)) {
    Piece p{s, 0, -1};
    const int dir = s.side / 2;
    if (gd == 2) {
      p.along = 1 - dir;
    } else {
      require(dir != 2, ErrorKind::InvalidArgument, "cross-section sampling needs lateral boundary sides");
      require(zStation.has_value(), ErrorKind::InvalidArgument, "3D sampling needs an axial station");
      p.along = 1 - dir;
      p.axial = 2;
    }
    pieces_.push_back(p);
  }
  require(!pieces_.empty(), ErrorKind::InvalidArgument, "boundary '" + boundary + "' is empty");
  if (gd == 3) {
    for (const auto& p : pieces_) {
      const auto& patch = model_->patches[p.side.patch];
      std::array<double, 3> u{};
      u[p.side.side / 2] = p.side.side % 2;
      u[2] = 0.0;
      const double z0 = patch.eval(std::span<const double>(u.data(), 3))[2];
      u[2] = 1.0;
      const double z1 = patch.eval(std::span<const double>(u.data(), 3))[2];
      require(*station_ >= std::min(z0, z1) - 1e-9 && *station_ <= std::max(z0, z1) + 1e-9, ErrorKind::InvalidArgument,
              "axial station outside the sampled boundary");
    }
  }
  offsets_.assign(1, 0);
  for (int q = 0; q < static_cast<int>(pieces_.size()); ++q) {
    std::vector<double> ts(resolution_);
    for (int i = 0; i < resolution_; ++i)
      ts[i] = static_cast<double>(i) / (resolution_ - 1);
    const auto& kv = model_->patches[pieces_[q].side.patch].knots(pieces_[q].along);
    for (double br : kv.breaks())
      ts.push_back(br);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(), [](double x, double y) { return y - x <= 1e-12; }), ts.end());
    for (double t : ts)
      samples_.push_back({q, t, Eigen::Vector2d::Zero()});
    offsets_.push_back(samples_.size());
  }
  parallelChunks(samples_.size(), [&](std::size_t b, std::size_t e, int) {
    for (std::size_t k = b; k < e; ++k)
      samples_[k].x = point(samples_[k].piece, samples_[k].t);
  });
}

std::array<double, 3> BoundarySampler::params(int piece, double t) const {
  const Piece& p = pieces_[piece];
  const auto& patch = model_->patches[p.side.patch];
  std::array<double, 3> u{};
  u[p.side.side / 2] = p.side.side % 2 == 0 ? 0.0 : 1.0;
  u[p.along] = std::clamp(t, 0.0, 1.0);
  if (p.axial < 0)
    return u;
  const double zs = *station_;
  auto zAt = [&](double zeta) {
    u[p.axial] = zeta;
    return patch.eval(std::span<const double>(u.data(), 3))[2];
  };
  double lo = 0.0, hi = 1.0;
  double flo = zAt(lo) - zs, fhi = zAt(hi) - zs;
  if (flo == 0.0 || fhi == 0.0) {
    u[p.axial] = flo == 0.0 ? 0.0 : 1.0;
    return u;
  }
  double zeta = std::clamp(flo / (flo - fhi), 0.0, 1.0);
  for (int it = 0; it < 50; ++it) {
    const double f = zAt(zeta) - zs;
    if (std::abs(f) <= 1e-13 * (1.0 + std::abs(zs)))
      break;
    if ((f < 0) == (flo < 0)) {
      lo = zeta;
      flo = f;
    } else {
      hi = zeta;
      fhi = f;
    }
    u[p.axial] = zeta;
    const double dz = patch.jacobian(std::span<const double>(u.data(), 3))(2, p.axial);
    double next = dz != 0.0 ? zeta - f / dz : 0.5 * (lo + hi);
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    zeta = next;
  }
  u[p.axial] = zeta;
  return u;
}

Eigen::Vector2d BoundarySampler::referencePoint(int piece, double t) const {
  const auto u = params(piece, t);
  const auto& patch = model_->patches[pieces_[piece].side.patch];
  const Eigen::VectorXd x = patch.eval(std::span<const double>(u.data(), patch.parDim()));
  return {x[0], x[1]};
}

Eigen::Vector2d BoundarySampler::point(int piece, double t) const {
  const auto u = params(piece, t);
  const int patchIndex = pieces_[piece].side.patch;
  const auto& patch = model_->patches[patchIndex];
  const std::span<const double> us(u.data(), patch.parDim());
  Eigen::VectorXd x = patch.eval(us);
  if (displacement_ && scale_ != 0.0)
    x += scale_ * displacement_->value(patchIndex, us);
  return {x[0], x[1]};
}

Eigen::Vector2d BoundarySampler::normal(int piece, double t) const {
  const auto u = params(piece, t);
  const Piece& p = pieces_[piece];
  const auto& patch = model_->patches[p.side.patch];
  const auto n = sideNormal(patch, p.side.side, std::span<const double>(u.data(), patch.parDim()));
  require(n.has_value(), ErrorKind::Geometry, "boundary normal undefined at a singular point");
  Eigen::Vector2d v((*n)[0], (*n)[1]);
  const double len = v.norm();
  return len > 0.0 ? Eigen::Vector2d(v / len) : v;
}

double ClearanceProfile::minGap() const {
  require(!gaps.empty(), ErrorKind::InvalidArgument, "empty clearance profile");
  return std::min(refinedMin, *std::min_element(gaps.begin(), gaps.end()));
}

namespace {

// Minimizer of a unimodal f on [lo, hi] by golden-section search.
template <class F>
double goldenMin(F&& f, double lo, double hi) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 60 && hi - lo > 1e-15; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

} // namespace

ClearanceProfile clearanceProfile(const BoundarySampler& a, const BoundarySampler& b) {
  const auto& as = a.samples();
  const auto& bs = b.samples();
  require(!as.empty() && !bs.empty(), ErrorKind::InvalidArgument, "clearance needs non-empty samplers");
  ClearanceProfile prof;
  const std::size_t n = as.size();
  prof.stations.resize(n);
  prof.gaps.resize(n);
  prof.points.resize(n);
  double arc = 0.0;
  Eigen::Vector2d prev = a.referencePoint(as[0].piece, as[0].t);
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::Vector2d r = a.referencePoint(as[k].piece, as[k].t);
    arc += (r - prev).norm();
    prev = r;
    prof.stations[k] = arc;
  }
  // At piece ends (casing cusps) the normal is ambiguous; when b closes into loops, the
  // side is taken from an even-odd test against its sample polygon instead.
  const int pieces = b.pieceCount();
  auto endPoint = [&](int piece, bool last) {
    const auto [first, stop] = b.pieceRange(piece);
    return bs[last ? stop - 1 : first].x;
  };
  bool closed = true;
  double scale = 0.0;
  for (const auto& smp : bs)
    scale = std::max(scale, smp.x.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * (1.0 + scale);
  for (int q = 0; q < pieces && closed; ++q)
    for (bool last : {false, true}) {
      const Eigen::Vector2d e = endPoint(q, last);
      int matches = 0;
      for (int r = 0; r < pieces; ++r)
        for (bool l2 : {false, true})
          if (!(r == q && l2 == last) && (endPoint(r, l2) - e).norm() <= tol)
            ++matches;
      if (matches == 0)
        closed = false;
    }
  auto oddCrossings = [&](const Eigen::Vector2d& p) {
    bool odd = false;
    for (int q = 0; q < pieces; ++q)
      for (std::size_t j = b.pieceRange(q).first; j + 1 < b.pieceRange(q).second; ++j) {
        const Eigen::Vector2d& u = bs[j].x;
        const Eigen::Vector2d& v = bs[j + 1].x;
        if ((u.y() > p.y()) != (v.y() > p.y())) {
          const double x = u.x() + (p.y() - u.y()) * (v.x() - u.x()) / (v.y() - u.y());
          if (x > p.x())
            odd = !odd;
        }
      }
    return odd;
  };
  bool openParity = false;
  if (closed) {
    const std::size_t mid = (b.pieceRange(0).first + b.pieceRange(0).second) / 2;
    const double step = (bs[mid + 1].x - bs[mid].x).norm();
    const Eigen::Vector2d probe = bs[mid].x + 4.0 * step * b.normal(0, bs[mid].t);
    openParity = oddCrossings(probe);
  }

  auto signedGap = [&](const Eigen::Vector2d& p) {
    std::size_t best = 0;
    double bestD = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < bs.size(); ++j) {
      const double d = (bs[j].x - p).squaredNorm();
      if (d < bestD) {
        bestD = d;
        best = j;
      }
    }
    const int piece = bs[best].piece;
    const auto [first, stop] = b.pieceRange(piece);
    double lo = bs[best > first ? best - 1 : best].t;
    double hi = bs[best + 1 < stop ? best + 1 : best].t;
    auto dist = [&](double t) { return (b.point(piece, t) - p).norm(); };
    double t = goldenMin(dist, lo, hi);
    double dmin = dist(t);
    if (dmin > std::sqrt(bestD)) {
      t = bs[best].t;
      dmin = std::sqrt(bestD);
    }
    const Eigen::Vector2d q = b.point(piece, t);
    bool outside;
    if (closed && (t <= 1e-9 || t >= 1.0 - 1e-9))
      outside = oddCrossings(p) == openParity;
    else
      outside = (p - q).dot(b.normal(piece, t)) >= 0.0;
    return outside ? dmin : -dmin;
  };

  parallelChunks(n, [&](std::size_t beg, std::size_t end, int) {
    for (std::size_t k = beg; k < end; ++k) {
      prof.gaps[k] = signedGap(as[k].x);
      prof.points[k] = as[k].x;
    }
  });

  // The smallest sampled gap is off by the sample spacing squared; refine it along a.
  const std::size_t k = std::min_element(prof.gaps.begin(), prof.gaps.end()) - prof.gaps.begin();
  const int piece = as[k].piece;
  const auto [first, stop] = a.pieceRange(piece);
  const double lo = as[k > first ? k - 1 : k].t, hi = as[k + 1 < stop ? k + 1 : k].t;
  if (hi > lo) {
    auto gapAt = [&](double t) { return signedGap(a.point(piece, t)); };
    prof.refinedMin = std::min(prof.gaps[k], gapAt(goldenMin(gapAt, lo, hi)));
  }
  return prof;
}

Contraction contractionPercent(const ClearanceProfile& before, const ClearanceProfile& after) {
  require(before.stations.size() == after.stations.size(), ErrorKind::InvalidArgument,
          "contraction needs matching stations");
  for (std::size_t i = 0; i < before.stations.size(); ++i)
    require(std::abs(before.stations[i] - after.stations[i]) <= 1e-9 * (1.0 + std::abs(before.stations[i])),
            ErrorKind::InvalidArgument, "contraction needs matching stations");
  Contraction c;
  c.percent.resize(before.gaps.size());
  c.flagged.resize(before.gaps.size());
  for (std::size_t i = 0; i < before.gaps.size(); ++i) {
    c.flagged[i] = !(before.gaps[i] > 0.0);
    c.percent[i] = c.flagged[i] ? std::numeric_limits<double>::quiet_NaN()
                                : 100.0 * (1.0 - after.gaps[i] / before.gaps[i]);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

namespace {

void put(std::FILE* f, double v) { std::fprintf(f, "%.17g", v); }

} // namespace

void exportVtk(const MultiPatchModel& model, const ExportField& fields, int resolution, const std::string& path) {
  require(resolution >= 2, ErrorKind::InvalidArgument, "export resolution must be at least 2");
  const int pd = model.parDim();
  const int gd = model.geoDim();
  require(pd >= 1 && pd <= 3 && gd <= 3, ErrorKind::InvalidArgument, "export supports up to three dimensions");
  std::vector<Eigen::Vector3d> pts;
  std::vector<Eigen::Vector3d> disp;
  std::vector<double> temp;
  std::vector<std::vector<int>> cells;
  const int r = resolution;
  for (int p = 0; p < static_cast<int>(model.patches.size()); ++p) {
    const auto& patch = model.patches[p];
    const int base = static_cast<int>(pts.size());
    const int n1 = pd > 1 ? r : 1, n2 = pd > 2 ? r : 1;
    for (int k = 0; k < n2; ++k)
      for (int j = 0; j < n1; ++j)
        for (int i = 0; i < r; ++i) {
          std::array<double, 3> u{static_cast<double>(i) / (r - 1), static_cast<double>(j) / (r - 1),
                                  static_cast<double>(k) / (r - 1)};
          const std::span<const double> us(u.data(), pd);
          const Eigen::VectorXd x = patch.eval(us);
          Eigen::Vector3d x3 = Eigen::Vector3d::Zero();
          x3.head(gd) = x;
          pts.push_back(x3);
          if (fields.displacement) {
            const Eigen::VectorXd v = evalDisplacement(*fields.displacement, p, us);
            Eigen::Vector3d v3 = Eigen::Vector3d::Zero();
            v3.head(v.size()) = v;
            disp.push_back(v3);
          }
          if (fields.temperature)
            temp.push_back((*fields.temperature)(p, us, x));
        }
    auto id = [&](int i, int j, int k) { return base + i + r * (j + n1 * k); };
    for (int k = 0; k < std::max(n2 - 1, 1); ++k)
      for (int j = 0; j < std::max(n1 - 1, 1); ++j)
        for (int i = 0; i < r - 1; ++i) {
          if (pd == 1)
            cells.push_back({id(i, 0, 0), id(i + 1, 0, 0)});
          else if (pd == 2)
            cells.push_back({id(i, j, 0), id(i + 1, j, 0), id(i + 1, j + 1, 0), id(i, j + 1, 0)});
          else
            cells.push_back({id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k), id(i, j, k + 1),
                             id(i + 1, j, k + 1), id(i + 1, j + 1, k + 1), id(i, j + 1, k + 1)});
        }
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  require(f != nullptr, ErrorKind::Io, "cannot open " + path);
  std::fprintf(f, "# vtk DataFile Version 3.0\nscrewiga %s\nASCII\nDATASET UNSTRUCTURED_GRID\n",
               model.name.empty() ? "model" : model.name.c_str());
  std::fprintf(f, "POINTS %zu double\n", pts.size());
  for (const auto& x : pts) {
    put(f, x[0]);
    std::fputc(' ', f);
    put(f, x[1]);
    std::fputc(' ', f);
    put(f, x[2]);
    std::fputc('\n', f);
  }
  std::size_t total = 0;
  for (const auto& c : cells)
    total += c.size() + 1;
  std::fprintf(f, "CELLS %zu %zu\n", cells.size(), total);
  for (const auto& c : cells) {
    std::fprintf(f, "%zu", c.size());
    for (int i : c)
      std::fprintf(f, " %d", i);
    std::fputc('\n', f);
  }
  const int type = pd == 1 ? 3 : (pd == 2 ? 9 : 12);
  std::fprintf(f, "CELL_TYPES %zu\n", cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i)
    std::fprintf(f, "%d\n", type);
  if (fields.displacement || fields.temperature)
    std::fprintf(f, "POINT_DATA %zu\n", pts.size());
  if (fields.temperature) {
    std::fprintf(f, "SCALARS temperature double 1\nLOOKUP_TABLE default\n");
    for (double t : temp) {
      put(f, t);
      std::fputc('\n', f);
    }
  }
  if (fields.displacement) {
    std::fprintf(f, "VECTORS displacement double\n");
    for (const auto& v : disp) {
      put(f, v[0]);
      std::fputc(' ', f);
      put(f, v[1]);
      std::fputc(' ', f);
      put(f, v[2]);
      std::fputc('\n', f);
    }
    std::fprintf(f, "SCALARS |displacement| double 1\nLOOKUP_TABLE default\n");
    for (const auto& v : disp) {
      put(f, v.norm());
      std::fputc('\n', f);
    }
  }
  const bool ok = std::ferror(f) == 0;
  std::fclose(f);
  require(ok, ErrorKind::Io, "write failed for " + path);
}

void writeClearanceCsv(const ClearanceProfile& profile, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  require(f != nullptr, ErrorKind::Io, "cannot open " + path);
  std::fprintf(f, "station_mm,gap_um\n");
  for (std::size_t i = 0; i < profile.gaps.size(); ++i)
    std::fprintf(f, "%.17g,%.17g\n", profile.stations[i], 1e3 * profile.gaps[i]);
  const bool ok = std::ferror(f) == 0;
  std::fclose(f);
  require(ok, ErrorKind::Io, "write failed for " + path);
}

} // namespace screwiga
