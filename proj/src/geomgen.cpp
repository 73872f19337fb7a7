#include "screwiga/geomgen.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "screwiga/error.hpp"
#include "screwiga/parallel.hpp"

namespace screwiga {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Vector2d toVec2(const Eigen::VectorXd& v) { return {v[0], v[1]}; }

// Newton iteration for the foot point of x on the curve, clamped to [lo, hi].
double newtonFoot(const TensorPatch& curve, const Eigen::VectorXd& x, double t, double lo, double hi, int steps) {
  for (int it = 0; it < steps; ++it) {
    const auto d = evalCurveDerivatives(curve, t, 2);
    const Eigen::VectorXd r = d[0] - x;
    const double f = d[1].dot(r);
    const double df = d[2].dot(r) + d[1].squaredNorm();
    if (df <= 0.0)
      break;
    double tn = std::clamp(t - f / df, lo, hi);
    // Backtrack until the distance decreases so a point cannot jump to another lobe.
    const double r0 = r.squaredNorm();
    int halvings = 0;
    while ((curve.eval(std::span<const double>(&tn, 1)) - x).squaredNorm() > r0 && halvings++ < 30)
      tn = t + 0.5 * (tn - t);
    if (halvings > 30 || std::abs(tn - t) < 1e-16)
      break;
    t = tn;
  }
  return t;
}

double distanceAt(const TensorPatch& curve, const Eigen::VectorXd& x, double t) {
  return (curve.eval(std::span<const double>(&t, 1)) - x).norm();
}

// Golden-section search on [lo, hi] followed by Newton polishing.
double refineFoot(const TensorPatch& curve, const Eigen::VectorXd& x, double lo, double hi) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = distanceAt(curve, x, c), fd = distanceAt(curve, x, d);
  for (int it = 0; it < 80 && (b - a) > 1e-15; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = distanceAt(curve, x, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = distanceAt(curve, x, d);
    }
  }
  double t = 0.5 * (a + b);
  const double tn = newtonFoot(curve, x, t, lo, hi, 3);
  return distanceAt(curve, x, tn) <= distanceAt(curve, x, t) ? tn : t;
}

struct DenseSamples {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
};

DenseSamples sampleCurve(const TensorPatch& curve, int count) {
  DenseSamples s;
  s.t.resize(count);
  s.x.resize(count);
  for (int i = 0; i < count; ++i) {
    s.t[i] = static_cast<double>(i) / (count - 1);
    s.x[i] = curve.eval(std::span<const double>(&s.t[i], 1));
  }
  return s;
}

int defaultSampleCount(const TensorPatch& curve, int requested) {
  return std::max(requested, 32 * curve.knots(0).elementCount() + 1);
}

// Best parameter for x given dense samples: nearest sample, then local refinement in the
// bracket formed by its neighbours.
double footFromSamples(const TensorPatch& curve, const DenseSamples& s, const Eigen::VectorXd& x) {
  std::size_t best = 0;
  double bestD = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const double d = (s.x[i] - x).squaredNorm();
    if (d < bestD) {
      bestD = d;
      best = i;
    }
  }
  const std::size_t last = s.t.size() - 1;
  auto refineAt = [&](std::size_t i) {
    const double t = refineFoot(curve, x, s.t[i == 0 ? 0 : i - 1], s.t[std::min(i + 1, last)]);
    return distanceAt(curve, x, t) <= std::sqrt(bestD) ? t : s.t[i];
  };
  double t = refineAt(best);
  // On a closed curve the seam sample stands for both ends.
  if ((best == 0 || best == last) && (s.x.front() - s.x.back()).norm() <= 1e-12 * (1.0 + s.x.front().norm())) {
    const double other = refineAt(best == 0 ? last : 0);
    if (distanceAt(curve, x, other) < distanceAt(curve, x, t))
      t = other;
  }
  return t;
}

Eigen::Vector2d rotateAbout(const Eigen::Vector2d& p, const Eigen::Vector2d& axis, double angle) {
  if (angle == 0.0)
    return p;
  const double c = std::cos(angle), s = std::sin(angle);
  const Eigen::Vector2d d = p - axis;
  return axis + Eigen::Vector2d(c * d.x() - s * d.y(), s * d.x() + c * d.y());
}

// Ruled patch in homogeneous coordinates between two curves sharing one knot vector.
// Direction 0 runs from `inner` (0) to `outer` (1).
TensorPatch ruledPatch(const TensorPatch& inner, const TensorPatch& outer, const KnotVector& radial) {
  require(inner.knots(0) == outer.knots(0), ErrorKind::Geometry, "ruled patch curves need identical knot vectors");
  const int n = inner.count(0);
  const int nr = radial.basisCount();
  const auto g = radial.greville();
  const bool rat = inner.rational() || outer.rational();
  std::vector<double> coefs(static_cast<std::size_t>(n) * nr * 2);
  std::vector<double> weights(rat ? n * nr : 0);
  for (int i = 0; i < n; ++i) {
    const auto pi = inner.controlPoint(i);
    const auto po = outer.controlPoint(i);
    const double wi = inner.weight(i), wo = outer.weight(i);
    for (int j = 0; j < nr; ++j) {
      const double a = 1.0 - g[j], b = g[j];
      const int flat = j + nr * i;
      if (rat && wi != wo) {
        const double w = a * wi + b * wo;
        for (int c = 0; c < 2; ++c)
          coefs[2 * flat + c] = (a * wi * pi[c] + b * wo * po[c]) / w;
        weights[flat] = w;
      } else {
        for (int c = 0; c < 2; ++c)
          coefs[2 * flat + c] = a * pi[c] + b * po[c];
        if (rat)
          weights[flat] = wi;
      }
    }
  }
  return TensorPatch({radial, inner.knots(0)}, 2, std::move(coefs), std::move(weights));
}

double signedArea(const DenseSamples& s) {
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < s.x.size(); ++i)
    a += s.x[i][0] * s.x[i + 1][1] - s.x[i + 1][0] * s.x[i][1];
  return 0.5 * a;
}

double windingNumber(const DenseSamples& s, const Eigen::Vector2d& c) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < s.x.size(); ++i) {
    const double a0 = std::atan2(s.x[i][1] - c.y(), s.x[i][0] - c.x());
    const double a1 = std::atan2(s.x[i + 1][1] - c.y(), s.x[i + 1][0] - c.x());
    double d = a1 - a0;
    while (d > kPi)
      d -= 2 * kPi;
    while (d < -kPi)
      d += 2 * kPi;
    total += d;
  }
  return total / (2 * kPi);
}

} // namespace

// ---------------------------------------------------------------------------
// Curve fitting
// ---------------------------------------------------------------------------

double closestParameter(const TensorPatch& curve, const Eigen::VectorXd& x, int samples) {
  require(curve.parDim() == 1, ErrorKind::InvalidArgument, "closest parameter needs a curve");
  const auto s = sampleCurve(curve, defaultSampleCount(curve, samples));
  return footFromSamples(curve, s, x);
}

double maxDeviation(const TensorPatch& curve, const std::vector<Eigen::Vector2d>& points) {
  require(curve.parDim() == 1 && curve.geoDim() == 2, ErrorKind::InvalidArgument,
          "deviation needs a planar curve");
  if (points.empty())
    return 0.0;
  const auto s = sampleCurve(curve, defaultSampleCount(curve, 2048));
  std::vector<double> partial(static_cast<std::size_t>(threadCount()), 0.0);
  parallelChunks(points.size(), [&](std::size_t b, std::size_t e, int w) {
    double m = 0.0;
    for (std::size_t k = b; k < e; ++k) {
      const Eigen::VectorXd x = points[k];
      const double t = footFromSamples(curve, s, x);
      m = std::max(m, distanceAt(curve, x, t));
    }
    partial[w] = std::max(partial[w], m);
  });
  return *std::max_element(partial.begin(), partial.end());
}

namespace {

struct FitProblem {
  std::vector<Eigen::Vector2d> pts;   // closure point appended for closed clouds
  std::vector<double> params;
  std::vector<int> segmentOf;         // segment index of every point
  std::vector<double> bounds;         // segment boundaries in parameter space
  std::vector<bool> pinned;           // parameter fixed (ends and corners)
};

// Indices of control points fixed to data: curve ends and the control point interpolated
// at every corner knot.
std::vector<std::pair<int, Eigen::Vector2d>> fixedControls(const FitProblem& fp, const KnotVector& kv) {
  std::vector<std::pair<int, Eigen::Vector2d>> fixed;
  const int n = kv.basisCount();
  fixed.emplace_back(0, fp.pts.front());
  for (std::size_t s = 1; s + 1 < fp.bounds.size(); ++s) {
    const double u = fp.bounds[s];
    const auto span = kv.evalBasis(u);
    int best = 0;
    for (int j = 0; j <= kv.degree(); ++j)
      if (span.values(0, j) > span.values(0, best))
        best = j;
    // The corner point is the first point of segment s.
    const auto it = std::find(fp.segmentOf.begin(), fp.segmentOf.end(), static_cast<int>(s));
    fixed.emplace_back(span.firstIndex + best, fp.pts[it - fp.segmentOf.begin()]);
  }
  fixed.emplace_back(n - 1, fp.pts.back());
  return fixed;
}

TensorPatch solveLeastSquares(const FitProblem& fp, const KnotVector& kv) {
  const int n = kv.basisCount();
  const int p = kv.degree();
  const auto fixed = fixedControls(fp, kv);
  std::vector<int> freeIdx(n, 0);
  Eigen::MatrixXd fixedVal = Eigen::MatrixXd::Zero(n, 2);
  std::vector<bool> isFixed(n, false);
  for (const auto& [i, v] : fixed) {
    isFixed[i] = true;
    fixedVal.row(i) = v.transpose();
  }
  int nf = 0;
  for (int i = 0; i < n; ++i)
    freeIdx[i] = isFixed[i] ? -1 : nf++;

  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(nf, nf);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nf, 2);
  std::vector<double> buf(p + 1);
  for (std::size_t k = 0; k < fp.pts.size(); ++k) {
    const int first = kv.evalInto(fp.params[k], 0, buf.data());
    Eigen::RowVector2d target = fp.pts[k].transpose();
    for (int a = 0; a <= p; ++a)
      if (isFixed[first + a])
        target -= buf[a] * fixedVal.row(first + a);
    for (int a = 0; a <= p; ++a) {
      const int fa = freeIdx[first + a];
      if (fa < 0)
        continue;
      rhs.row(fa) += buf[a] * target;
      for (int b = 0; b <= p; ++b) {
        const int fb = freeIdx[first + b];
        if (fb >= 0)
          N(fa, fb) += buf[a] * buf[b];
      }
    }
  }
  // Light second-difference fairing fixes control points of spans that hold no data.
  const double fair = 1e-9 * (nf > 0 ? N.diagonal().mean() : 0.0);
  for (int i = 1; i + 1 < n; ++i) {
    const int idx[3] = {i - 1, i, i + 1};
    const double c[3] = {1.0, -2.0, 1.0};
    for (int a = 0; a < 3; ++a) {
      const int fa = freeIdx[idx[a]];
      if (fa < 0)
        continue;
      for (int b = 0; b < 3; ++b) {
        const int fb = freeIdx[idx[b]];
        if (fb >= 0)
          N(fa, fb) += fair * c[a] * c[b];
        else
          rhs.row(fa) -= fair * c[a] * c[b] * fixedVal.row(idx[b]);
      }
    }
  }
  Eigen::MatrixXd sol;
  if (nf > 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(N);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-14)
      sol = ldlt.solve(rhs);
    else
      sol = N.completeOrthogonalDecomposition().solve(rhs);
  }
  std::vector<double> coefs(2 * n);
  for (int i = 0; i < n; ++i) {
    const Eigen::RowVector2d v = isFixed[i] ? Eigen::RowVector2d(fixedVal.row(i)) : Eigen::RowVector2d(sol.row(freeIdx[i]));
    coefs[2 * i] = v[0];
    coefs[2 * i + 1] = v[1];
  }
  return TensorPatch({kv}, 2, std::move(coefs));
}

// Foot-point parameter correction; returns per-point distances.
std::vector<double> correctParameters(FitProblem& fp, const TensorPatch& curve) {
  std::vector<double> dist(fp.pts.size());
  parallelChunks(fp.pts.size(), [&](std::size_t b, std::size_t e, int) {
    for (std::size_t k = b; k < e; ++k) {
      const Eigen::VectorXd x = fp.pts[k];
      if (!fp.pinned[k]) {
        const int s = fp.segmentOf[k];
        fp.params[k] = newtonFoot(curve, x, fp.params[k], fp.bounds[s], fp.bounds[s + 1], 6);
      }
      dist[k] = distanceAt(curve, x, fp.params[k]);
    }
  });
  // Keep parameters ordered so corrected foot points cannot fold back over each other.
  for (std::size_t k = 1; k < fp.pts.size(); ++k)
    if (!fp.pinned[k] && fp.params[k] < fp.params[k - 1])
      fp.params[k] = fp.params[k - 1];
  return dist;
}

KnotVector initialKnots(const FitProblem& fp, int degree, int initialSpans) {
  std::vector<double> k(degree + 1, 0.0);
  const std::size_t nseg = fp.bounds.size() - 1;
  for (std::size_t s = 0; s < nseg; ++s) {
    const double a = fp.bounds[s], b = fp.bounds[s + 1];
    const int spans = std::max(1, static_cast<int>(std::lround(initialSpans * (b - a))));
    if (s > 0)
      k.insert(k.end(), degree, a);
    for (int i = 1; i < spans; ++i)
      k.push_back(a + (b - a) * i / spans);
  }
  k.insert(k.end(), degree + 1, 1.0);
  return KnotVector(degree, std::move(k));
}

} // namespace

FitResult fitCurve(const PointCloud2D& cloud, const FitOptions& options) {
  require(options.degree >= 1, ErrorKind::InvalidArgument, "fitting degree must be at least 1");
  require(options.tolerance > 0.0, ErrorKind::InvalidArgument, "fitting tolerance must be positive");
  const int n = static_cast<int>(cloud.points.size());
  require(n >= options.degree + 1, ErrorKind::Geometry, "point cloud has fewer points than degree+1");

  std::vector<int> corners = cloud.corners;
  std::sort(corners.begin(), corners.end());
  corners.erase(std::unique(corners.begin(), corners.end()), corners.end());
  for (int c : corners)
    require(c >= 0 && c < n, ErrorKind::Geometry, "corner index out of range");

  FitProblem fp;
  std::vector<bool> isCorner(n + 1, false);
  if (cloud.closed) {
    const int shift = corners.empty() ? 0 : corners.front();
    for (int i = 0; i < n; ++i)
      fp.pts.push_back(cloud.points[(i + shift) % n]);
    fp.pts.push_back(fp.pts.front());
    for (int c : corners)
      isCorner[(c - shift + n) % n] = true;
    isCorner[0] = false;
  } else {
    fp.pts = cloud.points;
    for (int c : corners)
      isCorner[c] = (c > 0 && c < n - 1);
  }
  const int m = static_cast<int>(fp.pts.size());

  // Chord-length parameters.
  fp.params.assign(m, 0.0);
  for (int k = 1; k < m; ++k)
    fp.params[k] = fp.params[k - 1] + (fp.pts[k] - fp.pts[k - 1]).norm();
  const double total = fp.params.back();
  require(total > 0.0, ErrorKind::Geometry, "point cloud has zero length");
  for (auto& u : fp.params)
    u /= total;
  fp.params.back() = 1.0;

  fp.bounds = {0.0};
  fp.segmentOf.assign(m, 0);
  fp.pinned.assign(m, false);
  fp.pinned.front() = fp.pinned.back() = true;
  int seg = 0;
  for (int k = 0; k < m; ++k) {
    if (k > 0 && k < m - 1 && isCorner[k]) {
      require(fp.params[k] > fp.bounds.back(), ErrorKind::Geometry, "coincident corner points");
      fp.bounds.push_back(fp.params[k]);
      fp.pinned[k] = true;
      ++seg;
    }
    fp.segmentOf[k] = seg;
  }
  fp.bounds.push_back(1.0);
  // The last point closes the final segment.
  fp.segmentOf.back() = seg;

  KnotVector kv = initialKnots(fp, options.degree, options.initialSpans);
  require(kv.basisCount() <= m, ErrorKind::Geometry, "fewer points than control points requested");

  const std::vector<Eigen::Vector2d> original(fp.pts.begin(), fp.pts.end());
  FitResult result;
  int iterations = 0;
  for (;;) {
    ++iterations;
    TensorPatch curve = solveLeastSquares(fp, kv);
    std::vector<double> dist = correctParameters(fp, curve);
    double dev = *std::max_element(dist.begin(), dist.end());
    for (int c = 0; c < options.maxParameterCorrections && dev > options.tolerance; ++c) {
      TensorPatch next = solveLeastSquares(fp, kv);
      auto nd = correctParameters(fp, next);
      const double ndev = *std::max_element(nd.begin(), nd.end());
      curve = std::move(next);
      dist = std::move(nd);
      const bool stalled = ndev > 0.9 * dev;
      dev = ndev;
      if (stalled)
        break;
    }
    // Foot parameters can sit on clamped or seam values; converge on sampled distance.
    const double check = maxDeviation(curve, original);
    if (check <= options.tolerance) {
      result.curve = std::move(curve);
      result.report.maxDeviation = check;
      break;
    }
    require(kv.basisCount() + 1 <= options.maxControlPoints, ErrorKind::Geometry,
            "fitting tolerance unreachable within " + std::to_string(options.maxControlPoints) +
                " control points (deviation " + std::to_string(check) + " mm)");
    const auto worst = std::max_element(dist.begin(), dist.end()) - dist.begin();
    const int span = kv.findSpan(fp.params[worst]);
    const double mid = 0.5 * (kv.knots()[span] + kv.knots()[span + 1]);
    require(mid > kv.knots()[span] && mid < kv.knots()[span + 1], ErrorKind::Geometry,
            "fitting stalled: knot span at the worst point cannot be split further");
    kv = kv.withInsertedKnot(mid);
    require(kv.basisCount() <= m, ErrorKind::Geometry, "fewer points than control points requested");
  }
  result.report.controlPointCount = result.curve.controlCount();
  result.report.degree = options.degree;
  result.report.iterations = iterations;
  return result;
}

// ---------------------------------------------------------------------------
// Exact arcs
// ---------------------------------------------------------------------------

TensorPatch circularArc(const Eigen::Vector2d& center, double radius, double startAngle, double endAngle,
                        int segments) {
  const double sweep = endAngle - startAngle;
  require(radius > 0.0, ErrorKind::Geometry, "arc radius must be positive");
  require(sweep > 0.0, ErrorKind::Geometry, "arc sweep must be positive");
  require(sweep <= 2 * kPi * (1 + 1e-14), ErrorKind::Geometry, "arc sweep exceeds a full turn");
  int segs = segments > 0 ? segments : static_cast<int>(std::ceil(sweep / (0.5 * kPi) - 1e-12));
  segs = std::max(segs, 1);
  require(sweep / segs <= 0.5 * kPi * (1 + 1e-12), ErrorKind::Geometry, "arc segments must not exceed 90 degrees");
  const double dtheta = sweep / segs;
  const double wMid = std::cos(0.5 * dtheta);
  const bool full = std::abs(sweep - 2 * kPi) <= 1e-14 * 2 * kPi;

  std::vector<double> knots(3, 0.0);
  for (int s = 1; s < segs; ++s) {
    knots.push_back(static_cast<double>(s) / segs);
    knots.push_back(static_cast<double>(s) / segs);
  }
  knots.insert(knots.end(), 3, 1.0);

  std::vector<double> coefs;
  std::vector<double> weights;
  auto push = [&](double x, double y, double w) {
    coefs.push_back(x);
    coefs.push_back(y);
    weights.push_back(w);
  };
  for (int s = 0; s < segs; ++s) {
    const double a = startAngle + s * dtheta;
    if (s == 0)
      push(center.x() + radius * std::cos(a), center.y() + radius * std::sin(a), 1.0);
    const double am = a + 0.5 * dtheta;
    const double rm = radius / wMid;
    push(center.x() + rm * std::cos(am), center.y() + rm * std::sin(am), wMid);
    const double ae = startAngle + (s + 1) * dtheta;
    if (s + 1 == segs && full)
      push(coefs[0], coefs[1], 1.0);
    else
      push(center.x() + radius * std::cos(ae), center.y() + radius * std::sin(ae), 1.0);
  }
  return TensorPatch({KnotVector(2, std::move(knots))}, 2, std::move(coefs), std::move(weights));
}

// ---------------------------------------------------------------------------
// Multi-patch models
// ---------------------------------------------------------------------------

const std::vector<SideRef>& MultiPatchModel::boundary(const std::string& boundaryName) const {
  const auto it = boundaries.find(boundaryName);
  require(it != boundaries.end(), ErrorKind::InvalidArgument, "unknown boundary '" + boundaryName + "'");
  return it->second;
}

MultiPatchModel MultiPatchModel::refined(int times) const {
  require(times >= 0, ErrorKind::InvalidArgument, "refinement count must be non-negative");
  MultiPatchModel out = *this;
  if (times == 0)
    return out;
  for (auto& p : out.patches)
    p = p.uniformRefine(times);
  return out;
}

MultiPatchModel MultiPatchModel::translated(const Eigen::VectorXd& offset) const {
  require(offset.size() == geoDim(), ErrorKind::InvalidArgument, "translation has the wrong dimension");
  MultiPatchModel out = *this;
  for (auto& p : out.patches) {
    std::vector<double> c = p.coefs();
    for (std::size_t i = 0; i < c.size(); ++i)
      c[i] += offset[static_cast<int>(i % geoDim())];
    p = p.withCoefs(std::move(c));
  }
  return out;
}

int MultiPatchModel::elementCount() const {
  int total = 0;
  for (const auto& p : patches) {
    int e = 1;
    for (int d = 0; d < p.parDim(); ++d)
      e *= p.knots(d).elementCount();
    total += e;
  }
  return total;
}

MultiPatchModel buildBox(const Eigen::VectorXd& size, int degree, std::array<int, 3> spans) {
  const int d = static_cast<int>(size.size());
  require(d >= 1 && d <= 3, ErrorKind::InvalidArgument, "box dimension must lie in [1, 3]");
  std::vector<KnotVector> kvs;
  std::array<std::vector<double>, 3> g;
  for (int k = 0; k < d; ++k) {
    require(size[k] > 0.0, ErrorKind::Geometry, "box edges must be positive");
    kvs.push_back(KnotVector::uniform(degree, spans[k]));
    g[k] = kvs.back().greville();
  }
  const int n0 = kvs[0].basisCount();
  const int n1 = d > 1 ? kvs[1].basisCount() : 1;
  const int n2 = d > 2 ? kvs[2].basisCount() : 1;
  std::vector<double> coefs;
  for (int k = 0; k < n2; ++k)
    for (int j = 0; j < n1; ++j)
      for (int i = 0; i < n0; ++i) {
        const int idx[3] = {i, j, k};
        for (int c = 0; c < d; ++c)
          coefs.push_back(size[c] * g[c][idx[c]]);
      }
  MultiPatchModel m;
  m.name = "box";
  m.patches.emplace_back(std::move(kvs), d, std::move(coefs));
  const char* names[3] = {"x", "y", "z"};
  for (int k = 0; k < d; ++k) {
    m.boundaries[std::string(names[k]) + "Low"] = {{0, 2 * k}};
    m.boundaries[std::string(names[k]) + "High"] = {{0, 2 * k + 1}};
  }
  return m;
}

MultiPatchModel buildScaledBoundary(const TensorPatch& boundary, const Eigen::Vector2d& center,
                                    const ScaledBoundaryOptions& options) {
  require(boundary.parDim() == 1 && boundary.geoDim() == 2, ErrorKind::Geometry,
          "scaled boundary needs a planar curve");
  const int n = boundary.count(0);
  const auto first = boundary.controlPoint(0);
  const auto last = boundary.controlPoint(n - 1);
  require(first[0] == last[0] && first[1] == last[1], ErrorKind::Geometry, "boundary curve is not closed");

  const auto samples = sampleCurve(boundary, defaultSampleCount(boundary, 2048));
  require(signedArea(samples) > 0.0, ErrorKind::Geometry,
          "orientation mismatch: boundary curve must run counterclockwise");
  require(std::abs(windingNumber(samples, center) - 1.0) < 1e-6, ErrorKind::Geometry,
          "center lies outside the boundary curve");

  double minDist = std::numeric_limits<double>::infinity();
  for (const auto& x : samples.x)
    minDist = std::min(minDist, (toVec2(x) - center).norm());
  const Eigen::VectorXd c = center;
  minDist = std::min(minDist, distanceAt(boundary, c, footFromSamples(boundary, samples, c)));
  const double rho = options.coreRadius > 0.0 ? options.coreRadius : 0.4 * minDist;
  require(rho < minDist, ErrorKind::Geometry, "core circle intersects the boundary curve");

  // Core curve: boundary control points scaled towards the center so that the curve point
  // at each Greville abscissa lands on the core circle.
  const auto g = boundary.knots(0).greville();
  std::vector<double> core(2 * n);
  for (int i = 0; i < n; ++i) {
    const double gi = g[i];
    const Eigen::Vector2d q = toVec2(boundary.eval(std::span<const double>(&gi, 1)));
    const double scale = rho / (q - center).norm();
    const auto pi = boundary.controlPoint(i);
    for (int k = 0; k < 2; ++k)
      core[2 * i + k] = center[k] + scale * (pi[k] - center[k]);
  }
  core[2 * (n - 1)] = core[0];
  core[2 * (n - 1) + 1] = core[1];
  const TensorPatch coreCurve = boundary.withCoefs(core);

  std::vector<double> centerCoefs(2 * n);
  for (int i = 0; i < n; ++i) {
    centerCoefs[2 * i] = center.x();
    centerCoefs[2 * i + 1] = center.y();
  }
  const TensorPatch centerCurve = boundary.withCoefs(centerCoefs);

  MultiPatchModel m;
  m.patches.push_back(ruledPatch(centerCurve, coreCurve, KnotVector::uniform(options.radialDegree, options.coreRadialSpans)));
  m.patches.push_back(ruledPatch(coreCurve, boundary, KnotVector::uniform(options.radialDegree, options.outerRadialSpans)));
  m.interfaces.push_back({{0, 1}, {1, 0}, {false, false}});
  m.interfaces.push_back({{0, 2}, {0, 3}, {false, false}});
  m.interfaces.push_back({{1, 2}, {1, 3}, {false, false}});
  m.degenerateSides.push_back({0, 0});
  m.boundaries["boundary"] = {{1, 1}};
  return m;
}

MultiPatchModel buildCasing(double maleBore, double femaleBore, double axisDistance, double thickness,
                            const CasingOptions& options) {
  require(thickness > 0.0, ErrorKind::Geometry, "casing thickness must be positive");
  require(maleBore > 0.0 && femaleBore > 0.0, ErrorKind::Geometry, "bore radii must be positive");
  require(axisDistance >= 0.0, ErrorKind::Geometry, "axis distance must be non-negative");
  const KnotVector radial = KnotVector::uniform(options.degree, options.radialSpans);

  MultiPatchModel m;
  m.name = "casing";
  if (axisDistance == 0.0) {
    const Eigen::Vector2d c(0.0, 0.0);
    const TensorPatch in = circularArc(c, maleBore, 0.0, 2 * kPi, 4);
    const TensorPatch out = circularArc(c, maleBore + thickness, 0.0, 2 * kPi, 4);
    m.patches.push_back(ruledPatch(in, out, radial));
    m.interfaces.push_back({{0, 2}, {0, 3}, {false, false}});
    m.boundaries["casingInner"] = {{0, 0}};
    m.boundaries["casingOuter"] = {{0, 1}};
    return m;
  }
  require(axisDistance < maleBore + femaleBore, ErrorKind::Geometry, "casing bores do not overlap");
  require(axisDistance > std::abs(maleBore - femaleBore), ErrorKind::Geometry, "one casing bore contains the other");

  auto cusp = [&](double r1, double r2) {
    const double x = (axisDistance * axisDistance + r1 * r1 - r2 * r2) / (2 * axisDistance);
    return Eigen::Vector2d(x, std::sqrt(r1 * r1 - x * x));
  };
  const Eigen::Vector2d ci = cusp(maleBore, femaleBore);
  const Eigen::Vector2d co = cusp(maleBore + thickness, femaleBore + thickness);
  const Eigen::Vector2d cm(0.0, 0.0), cf(axisDistance, 0.0);

  auto arcBetween = [&](const Eigen::Vector2d& c, double r, const Eigen::Vector2d& from, const Eigen::Vector2d& to,
                        bool aroundMale, int segs) {
    double a0 = std::atan2(from.y() - c.y(), from.x() - c.x());
    double a1 = std::atan2(to.y() - c.y(), to.x() - c.x());
    if (aroundMale) {
      // upper cusp -> far side -> lower cusp
      if (a1 < a0)
        a1 += 2 * kPi;
    } else {
      if (a1 < a0)
        a1 += 2 * kPi;
    }
    TensorPatch arc = circularArc(c, r, a0, a1, segs);
    std::vector<double> cc = arc.coefs();
    const int n = arc.count(0);
    cc[0] = from.x();
    cc[1] = from.y();
    cc[2 * (n - 1)] = to.x();
    cc[2 * (n - 1) + 1] = to.y();
    return arc.withCoefs(std::move(cc));
  };
  auto segmentsFor = [&](const Eigen::Vector2d& c, const Eigen::Vector2d& from, const Eigen::Vector2d& to) {
    double a0 = std::atan2(from.y() - c.y(), from.x() - c.x());
    double a1 = std::atan2(to.y() - c.y(), to.x() - c.x());
    if (a1 < a0)
      a1 += 2 * kPi;
    return static_cast<int>(std::ceil((a1 - a0) / (0.5 * kPi) - 1e-12));
  };

  const Eigen::Vector2d ciLow(ci.x(), -ci.y()), coLow(co.x(), -co.y());
  // Male side: counterclockwise about the male axis from the upper to the lower cusp.
  const int segM = std::max(segmentsFor(cm, ci, ciLow), segmentsFor(cm, co, coLow));
  const TensorPatch maleIn = arcBetween(cm, maleBore, ci, ciLow, true, segM);
  const TensorPatch maleOut = arcBetween(cm, maleBore + thickness, co, coLow, true, segM);
  // Female side: counterclockwise about the female axis from the lower to the upper cusp.
  const int segF = std::max(segmentsFor(cf, ciLow, ci), segmentsFor(cf, coLow, co));
  const TensorPatch femIn = arcBetween(cf, femaleBore, ciLow, ci, false, segF);
  const TensorPatch femOut = arcBetween(cf, femaleBore + thickness, coLow, co, false, segF);

  m.patches.push_back(ruledPatch(maleIn, maleOut, radial));
  m.patches.push_back(ruledPatch(femIn, femOut, radial));
  m.interfaces.push_back({{0, 3}, {1, 2}, {false, false}});
  m.interfaces.push_back({{1, 3}, {0, 2}, {false, false}});
  m.boundaries["casingInner"] = {{0, 0}, {1, 0}};
  m.boundaries["casingOuter"] = {{0, 1}, {1, 1}};
  return m;
}

namespace {

// Lofts one planar patch into a volume patch over [z0, z1]; control layer k is rotated by
// angle0 + twist * zeta_k about the axis.
TensorPatch loftPatch(const TensorPatch& base, const KnotVector& axial, double z0, double z1, double angle0,
                      double twist, const Eigen::Vector2d& axis) {
  const int n0 = base.count(0), n1 = base.count(1);
  const int nz = axial.basisCount();
  const auto g = axial.greville();
  // Control layers interpolate the rotated sections at the Greville abscissae, so every
  // section at those stations is the exact rotated profile.
  Eigen::MatrixXd collocation = Eigen::MatrixXd::Zero(nz, nz);
  for (int k = 0; k < nz; ++k) {
    const auto b = axial.evalBasis(g[k]);
    for (int a = 0; a <= axial.degree(); ++a)
      collocation(k, b.firstIndex + a) = b.values(0, a);
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(collocation);
  std::vector<double> coefs(static_cast<std::size_t>(n0) * n1 * nz * 3);
  std::vector<double> weights(base.rational() ? n0 * n1 * nz : 0);
  Eigen::MatrixXd samples(nz, 2);
  for (int j = 0; j < n1; ++j)
    for (int i = 0; i < n0; ++i) {
      const int f2 = i + n0 * j;
      const auto cp = base.controlPoint(f2);
      for (int k = 0; k < nz; ++k)
        samples.row(k) = rotateAbout(Eigen::Vector2d(cp[0], cp[1]), axis, angle0 + twist * g[k]).transpose();
      Eigen::MatrixXd layers = twist == 0.0 ? samples : Eigen::MatrixXd(lu.solve(samples));
      // Clamped ends interpolate exactly; keep them bitwise equal to the neighbouring patches.
      layers.row(0) = samples.row(0);
      layers.row(nz - 1) = samples.row(nz - 1);
      for (int k = 0; k < nz; ++k) {
        const int f3 = f2 + n0 * n1 * k;
        coefs[3 * f3] = layers(k, 0);
        coefs[3 * f3 + 1] = layers(k, 1);
        coefs[3 * f3 + 2] = g[k] == 0.0 ? z0 : (g[k] == 1.0 ? z1 : z0 + (z1 - z0) * g[k]);
        if (base.rational())
          weights[f3] = base.weight(f2);
      }
    }
  return TensorPatch({base.knots(0), base.knots(1), axial}, 3, std::move(coefs), std::move(weights));
}

KnotVector axialKnots(int degree, int layers) {
  require(layers >= degree + 1, ErrorKind::Geometry, "loft needs at least axialDegree+1 layers");
  return KnotVector::uniform(degree, layers - degree);
}

} // namespace

MultiPatchModel extrude(const MultiPatchModel& crossSection, const LoftOptions& options) {
  require(crossSection.parDim() == 2 && crossSection.geoDim() == 2, ErrorKind::Geometry,
          "extrusion needs a planar two-dimensional model");
  require(options.length > 0.0, ErrorKind::Geometry, "loft length must be positive");
  const KnotVector axial = axialKnots(options.axialDegree, options.layers);
  const double twist = options.pitchDegrees * kPi / 180.0;
  MultiPatchModel m;
  m.name = crossSection.name;
  for (const auto& p : crossSection.patches)
    m.patches.push_back(loftPatch(p, axial, 0.0, options.length, 0.0, twist, options.axis));
  m.interfaces = crossSection.interfaces;
  for (auto& i : m.interfaces)
    i.flip[1] = false;
  m.boundaries = crossSection.boundaries;
  m.degenerateSides = crossSection.degenerateSides;
  auto& low = m.boundaries["lowEnd"];
  auto& high = m.boundaries["highEnd"];
  for (int p = 0; p < static_cast<int>(m.patches.size()); ++p) {
    low.push_back({p, 4});
    high.push_back({p, 5});
  }
  return m;
}

MultiPatchModel loftTwisted(const MultiPatchModel& crossSection, const LoftOptions& options) {
  require(crossSection.patches.size() == 2 && crossSection.degenerateSides.size() == 1 &&
              crossSection.degenerateSides.front().patch == 0,
          ErrorKind::Geometry, "twisted loft expects a scaled-boundary cross-section (core + outer layer)");
  require(options.length > 0.0, ErrorKind::Geometry, "loft length must be positive");
  require(options.shaftLength > 0.0, ErrorKind::Geometry, "shaft length must be positive");
  const KnotVector axial = axialKnots(options.axialDegree, options.layers);
  const KnotVector shaftAxial = KnotVector::uniform(options.axialDegree, options.shaftSpans);
  const double twist = options.pitchDegrees * kPi / 180.0;
  const TensorPatch& core = crossSection.patches[0];
  const TensorPatch& outer = crossSection.patches[1];
  const double L = options.length, s = options.shaftLength;

  MultiPatchModel m;
  m.name = crossSection.name;
  m.patches.push_back(loftPatch(outer, axial, 0.0, L, 0.0, twist, options.axis));
  m.patches.push_back(loftPatch(core, shaftAxial, -s, 0.0, 0.0, 0.0, options.axis));
  m.patches.push_back(loftPatch(core, axial, 0.0, L, 0.0, twist, options.axis));
  m.patches.push_back(loftPatch(core, shaftAxial, L, L + s, twist, 0.0, options.axis));

  m.interfaces.push_back({{0, 0}, {2, 1}, {false, false}});
  m.interfaces.push_back({{2, 4}, {1, 5}, {false, false}});
  m.interfaces.push_back({{2, 5}, {3, 4}, {false, false}});
  for (int p = 0; p < 4; ++p)
    m.interfaces.push_back({{p, 2}, {p, 3}, {false, false}});
  m.degenerateSides = {{1, 0}, {2, 0}, {3, 0}};
  m.boundaries["lateral"] = {{0, 1}};
  m.boundaries["shaftLateral"] = {{1, 1}, {3, 1}};
  m.boundaries["lowPressureEnd"] = {{1, 4}};
  m.boundaries["highPressureEnd"] = {{3, 5}};
  m.boundaries["bodyLowPressureEnd"] = {{0, 4}};
  m.boundaries["bodyHighPressureEnd"] = {{0, 5}};
  return m;
}

std::vector<int> orientedSideIndices(const TensorPatch& p, int side, const std::array<bool, 2>& flip) {
  const int dir = side / 2;
  std::vector<int> tang;
  for (int d = 0; d < p.parDim(); ++d)
    if (d != dir)
      tang.push_back(d);
  const auto idx = p.sideIndices(side);
  if (tang.empty())
    return idx;
  const int n0 = p.count(tang[0]);
  const int n1 = tang.size() > 1 ? p.count(tang[1]) : 1;
  std::vector<int> out(idx.size());
  for (int j = 0; j < n1; ++j)
    for (int i = 0; i < n0; ++i) {
      const int si = flip[0] ? n0 - 1 - i : i;
      const int sj = (tang.size() > 1 && flip[1]) ? n1 - 1 - j : j;
      out[i + n0 * j] = idx[si + n0 * sj];
    }
  return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

int ValidationReport::count(FindingKind kind) const {
  return static_cast<int>(std::count_if(findings.begin(), findings.end(), [&](const Finding& f) { return f.kind == kind; }));
}

bool ValidationReport::ok() const {
  return std::all_of(findings.begin(), findings.end(),
                     [](const Finding& f) { return f.kind == FindingKind::DeclaredSingularity; });
}

const char* findingKindName(FindingKind kind) {
  switch (kind) {
  case FindingKind::InterfaceMismatch:
    return "interface-mismatch";
  case FindingKind::NonPositiveJacobian:
    return "non-positive-jacobian";
  case FindingKind::DeclaredSingularity:
    return "declared-singularity";
  case FindingKind::Topology:
    return "topology";
  }
  return "unknown";
}

namespace {

std::string sideName(const SideRef& s) {
  return "patch " + std::to_string(s.patch) + " side " + std::to_string(s.side);
}

bool reversedEqual(const KnotVector& a, const KnotVector& b) {
  if (a.degree() != b.degree() || a.size() != b.size())
    return false;
  for (int i = 0; i < a.size(); ++i)
    if (a.knots()[i] != 1.0 - b.knots()[a.size() - 1 - i])
      return false;
  return true;
}

} // namespace

ValidationReport validateModel(const MultiPatchModel& model, int samplesPerDirection) {
  ValidationReport rep;
  const int np = static_cast<int>(model.patches.size());
  auto validSide = [&](const SideRef& s) {
    return s.patch >= 0 && s.patch < np && s.side >= 0 && s.side < 2 * model.patches[s.patch].parDim();
  };

  // Topology
  std::map<SideRef, int> interfaceUse;
  for (std::size_t k = 0; k < model.interfaces.size(); ++k) {
    const auto& itf = model.interfaces[k];
    if (!validSide(itf.a) || !validSide(itf.b)) {
      rep.findings.push_back({FindingKind::Topology, "interface " + std::to_string(k) + " references a missing side"});
      continue;
    }
    ++interfaceUse[itf.a];
    ++interfaceUse[itf.b];
  }
  for (const auto& [s, n] : interfaceUse)
    if (n > 1)
      rep.findings.push_back({FindingKind::Topology, sideName(s) + " lies on " + std::to_string(n) + " interfaces"});
  for (const auto& [name, sides] : model.boundaries)
    for (const auto& s : sides) {
      if (!validSide(s))
        rep.findings.push_back({FindingKind::Topology, "boundary '" + name + "' references a missing side"});
      else if (interfaceUse.count(s))
        rep.findings.push_back({FindingKind::Topology, "boundary '" + name + "' contains interface " + sideName(s)});
    }

  // Interface conformity
  for (std::size_t k = 0; k < model.interfaces.size(); ++k) {
    const auto& itf = model.interfaces[k];
    if (!validSide(itf.a) || !validSide(itf.b))
      continue;
    const TensorPatch& pa = model.patches[itf.a.patch];
    const TensorPatch& pb = model.patches[itf.b.patch];
    const std::string label = "interface " + std::to_string(k) + " (" + sideName(itf.a) + " / " + sideName(itf.b) + ")";
    bool knotsOk = pa.parDim() == pb.parDim();
    std::vector<int> ta, tb;
    for (int d = 0; d < pa.parDim(); ++d)
      if (d != itf.a.side / 2)
        ta.push_back(d);
    for (int d = 0; d < pb.parDim(); ++d)
      if (d != itf.b.side / 2)
        tb.push_back(d);
    if (knotsOk && ta.size() == tb.size()) {
      for (std::size_t t = 0; t < ta.size(); ++t) {
        const auto& ka = pa.knots(ta[t]);
        const auto& kb = pb.knots(tb[t]);
        knotsOk = knotsOk && (itf.flip[t] ? reversedEqual(ka, kb) : ka == kb);
      }
    } else {
      knotsOk = false;
    }
    if (!knotsOk) {
      rep.findings.push_back({FindingKind::InterfaceMismatch, label + ": knot vectors differ"});
      continue;
    }
    const auto ia = pa.sideIndices(itf.a.side);
    const auto ib = orientedSideIndices(pb, itf.b.side, itf.flip);
    double worst = 0.0;
    bool weightMismatch = false;
    for (std::size_t i = 0; i < ia.size(); ++i) {
      const auto xa = pa.controlPoint(ia[i]);
      const auto xb = pb.controlPoint(ib[i]);
      for (int c = 0; c < pa.geoDim(); ++c)
        worst = std::max(worst, std::abs(xa[c] - xb[c]));
      weightMismatch = weightMismatch || pa.weight(ia[i]) != pb.weight(ib[i]);
    }
    if (worst > 0.0 || weightMismatch) {
      std::ostringstream os;
      os << label << ": control points differ by up to " << worst << " mm" << (weightMismatch ? ", weights differ" : "");
      rep.findings.push_back({FindingKind::InterfaceMismatch, os.str()});
    }
  }

  // Jacobian positivity on a sample grid, skipping declared degenerate sides.
  const int ns = std::max(2, samplesPerDirection);
  for (int p = 0; p < np; ++p) {
    const TensorPatch& patch = model.patches[p];
    if (patch.parDim() != patch.geoDim())
      continue;
    const int d = patch.parDim();
    int bad = 0;
    double minDet = std::numeric_limits<double>::infinity();
    const int total = static_cast<int>(std::pow(ns, d));
    for (int s = 0; s < total; ++s) {
      std::array<double, 3> u{0, 0, 0};
      int rem = s;
      bool onDegenerate = false;
      for (int k = 0; k < d; ++k) {
        const int i = rem % ns;
        rem /= ns;
        u[k] = static_cast<double>(i) / (ns - 1);
        for (const auto& ds : model.degenerateSides)
          if (ds.patch == p && ds.side / 2 == k && ((ds.side % 2 == 0 && i == 0) || (ds.side % 2 == 1 && i == ns - 1)))
            onDegenerate = true;
      }
      if (onDegenerate)
        continue;
      const double det = patch.jacobian(std::span<const double>(u.data(), d)).determinant();
      minDet = std::min(minDet, det);
      if (!(det > 0.0))
        ++bad;
    }
    if (bad > 0) {
      std::ostringstream os;
      os << "patch " << p << ": " << bad << " sample points with det J <= 0 (min " << minDet << ")";
      rep.findings.push_back({FindingKind::NonPositiveJacobian, os.str()});
    }
  }

  // Declared singular sets, grouped by shared collapsed points.
  const int nd = static_cast<int>(model.degenerateSides.size());
  std::vector<int> group(nd);
  std::iota(group.begin(), group.end(), 0);
  std::function<int(int)> findRoot = [&](int i) { return group[i] == i ? i : group[i] = findRoot(group[i]); };
  auto pointsOf = [&](const SideRef& s) {
    std::vector<Eigen::VectorXd> pts;
    const auto& patch = model.patches[s.patch];
    for (int i : patch.sideIndices(s.side)) {
      const auto cp = patch.controlPoint(i);
      pts.emplace_back(Eigen::Map<const Eigen::VectorXd>(cp.data(), patch.geoDim()));
    }
    return pts;
  };
  for (int i = 0; i < nd; ++i)
    for (int j = i + 1; j < nd; ++j) {
      if (!validSide(model.degenerateSides[i]) || !validSide(model.degenerateSides[j]))
        continue;
      const auto a = pointsOf(model.degenerateSides[i]);
      const auto b = pointsOf(model.degenerateSides[j]);
      bool shared = false;
      for (const auto& x : a) {
        for (const auto& y : b)
          if ((x - y).norm() <= 1e-9 * (1.0 + x.norm())) {
            shared = true;
            break;
          }
        if (shared)
          break;
      }
      if (shared)
        group[findRoot(i)] = findRoot(j);
    }
  std::map<int, std::vector<SideRef>> groups;
  for (int i = 0; i < nd; ++i)
    groups[findRoot(i)].push_back(model.degenerateSides[i]);
  for (const auto& [root, sides] : groups) {
    std::ostringstream os;
    os << "declared singular " << (model.parDim() == 3 ? "line" : "point") << " on";
    for (const auto& s : sides)
      os << " [" << sideName(s) << "]";
    rep.findings.push_back({FindingKind::DeclaredSingularity, os.str()});
  }
  return rep;
}

} // namespace screwiga
