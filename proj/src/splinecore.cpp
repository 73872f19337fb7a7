#include "screwiga/splinecore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "screwiga/error.hpp"

namespace screwiga {

namespace {


// a / b with the convention that fractions with a zero denominator vanish.
inline double safeRatio(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

} // namespace

// ---------------------------------------------------------------------------
// KnotVector
// ---------------------------------------------------------------------------

KnotVector::KnotVector(int degree, std::vector<double> knots) : degree_(degree), knots_(std::move(knots)) {
  require(degree_ >= 0 && degree_ <= kMaxDegree, ErrorKind::InvalidArgument,
          "knot vector degree must lie in [0, " + std::to_string(kMaxDegree) + "]");
  const int p = degree_;
  require(size() >= 2 * (p + 1), ErrorKind::InvalidArgument, "knot vector needs at least 2(degree+1) knots");
  for (std::size_t i = 1; i < knots_.size(); ++i)
    require(knots_[i] >= knots_[i - 1], ErrorKind::InvalidArgument, "knots must be non-decreasing");
  require(knots_.front() == 0.0 && knots_.back() == 1.0, ErrorKind::InvalidArgument,
          "knot vector must span [0, 1]");
  for (int i = 0; i <= p; ++i) {
    require(knots_[i] == knots_.front() && knots_[size() - 1 - i] == knots_.back(), ErrorKind::InvalidArgument,
            "knot vector must be clamped (first and last degree+1 knots equal)");
  }
  require(knots_[p + 1] > knots_.front() || size() == 2 * (p + 1), ErrorKind::InvalidArgument,
          "end knot multiplicity exceeds degree+1");
  require(knots_[size() - p - 2] < knots_.back() || size() == 2 * (p + 1), ErrorKind::InvalidArgument,
          "end knot multiplicity exceeds degree+1");
  for (int i = p + 1; i < size() - p - 1; ++i)
    require(multiplicity(knots_[i]) <= p + 1, ErrorKind::InvalidArgument,
            "interior knot multiplicity exceeds degree+1");
}

KnotVector KnotVector::uniform(int degree, int spans) {
  require(spans >= 1, ErrorKind::InvalidArgument, "uniform knot vector needs at least one span");
  std::vector<double> k(degree + 1, 0.0);
  for (int i = 1; i < spans; ++i)
    k.push_back(static_cast<double>(i) / spans);
  k.insert(k.end(), degree + 1, 1.0);
  return KnotVector(degree, std::move(k));
}

int KnotVector::findSpan(double t) const {
  require(contains(t), ErrorKind::InvalidArgument, "parameter outside knot vector domain");
  const int n = basisCount();
  if (t >= knots_[n])
    return n - 1;
  // Largest i with knots[i] <= t, restricted to [p, n-1].
  auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n + 1, t);
  return static_cast<int>(it - knots_.begin()) - 1;
}

int KnotVector::multiplicity(double t) const {
  return static_cast<int>(std::count(knots_.begin(), knots_.end(), t));
}

std::vector<double> KnotVector::breaks() const {
  std::vector<double> b;
  for (double k : knots_)
    if (b.empty() || k > b.back())
      b.push_back(k);
  return b;
}

std::vector<double> KnotVector::greville() const {
  std::vector<double> g(basisCount());
  for (int i = 0; i < basisCount(); ++i) {
    if (degree_ == 0) {
      g[i] = 0.5 * (knots_[i] + knots_[i + 1]);
      continue;
    }
    double s = 0.0;
    for (int j = 1; j <= degree_; ++j)
      s += knots_[i + j];
    g[i] = s / degree_;
  }
  return g;
}

int KnotVector::evalInto(double t, int upTo, double* out) const {
  const int p = degree_;
  const int span = findSpan(t);
  double left[kMaxDegree + 1];
  double right[kMaxDegree + 1];
  double ndu[kMaxDegree + 1][kMaxDegree + 1];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - knots_[span + 1 - j];
    right[j] = knots_[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = safeRatio(ndu[r][j - 1], ndu[j][r]);
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  const int w = p + 1;
  for (int j = 0; j <= p; ++j)
    out[j] = ndu[j][p];
  if (upTo <= 0)
    return span - p;

  // Derivatives as combinations of lower-degree basis functions.
  double a[2][kMaxDegree + 1];
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= upTo; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a[s2][0] = safeRatio(a[s1][0], ndu[pk + 1][rk]);
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = safeRatio(a[s1][j] - a[s1][j - 1], ndu[pk + 1][rk + j]);
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = safeRatio(-a[s1][k - 1], ndu[pk + 1][r]);
        d += a[s2][k] * ndu[r][pk];
      }
      out[k * w + r] = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= upTo; ++k) {
    for (int j = 0; j <= p; ++j)
      out[k * w + j] *= factor;
    factor *= (p - k);
  }
  return span - p;
}

BasisSpan KnotVector::evalBasisDerivatives(double t, int upTo) const {
  require(upTo >= 0, ErrorKind::InvalidArgument, "derivative order must be non-negative");
  require(upTo <= degree_, ErrorKind::InvalidArgument, "derivative order exceeds degree");
  require(contains(t), ErrorKind::InvalidArgument, "parameter outside knot vector domain");
  std::vector<double> buf(static_cast<std::size_t>(upTo + 1) * (degree_ + 1));
  BasisSpan out;
  out.firstIndex = evalInto(t, upTo, buf.data());
  out.values.resize(upTo + 1, degree_ + 1);
  for (int k = 0; k <= upTo; ++k)
    for (int j = 0; j <= degree_; ++j)
      out.values(k, j) = buf[k * (degree_ + 1) + j];
  return out;
}

double KnotVector::basisFunction(int i, double t) const {
  require(i >= 0 && i < basisCount(), ErrorKind::InvalidArgument, "basis index out of range");
  require(contains(t), ErrorKind::InvalidArgument, "parameter outside knot vector domain");
  // Degree-0 indicators with the right endpoint assigned to the last non-empty span.
  const int span = findSpan(t);
  std::vector<double> n(degree_ + 1);
  for (int j = 0; j <= degree_; ++j)
    n[j] = (i + j == span) ? 1.0 : 0.0;
  for (int q = 1; q <= degree_; ++q) {
    for (int j = 0; j <= degree_ - q; ++j) {
      const int r = i + j;
      const double a = safeRatio(t - knots_[r], knots_[r + q] - knots_[r]);
      const double b = safeRatio(knots_[r + q + 1] - t, knots_[r + q + 1] - knots_[r + 1]);
      n[j] = a * n[j] + b * n[j + 1];
    }
  }
  return n[0];
}

KnotVector KnotVector::withInsertedKnot(double t) const {
  std::vector<double> k = knots_;
  k.insert(std::upper_bound(k.begin(), k.end(), t), t);
  return KnotVector(degree_, std::move(k));
}

// ---------------------------------------------------------------------------
// TensorPatch
// ---------------------------------------------------------------------------

TensorPatch::TensorPatch(std::vector<KnotVector> knots, int geoDim, std::vector<double> coefs,
                         std::vector<double> weights)
    : knots_(std::move(knots)), geoDim_(geoDim), coefs_(std::move(coefs)), weights_(std::move(weights)) {
  require(parDim() >= 1 && parDim() <= 3, ErrorKind::InvalidArgument, "patch parametric dimension must be 1, 2 or 3");
  require(geoDim_ >= 1 && geoDim_ <= 3, ErrorKind::InvalidArgument, "patch geometric dimension must be 1, 2 or 3");
  const int n = controlCount();
  require(static_cast<int>(coefs_.size()) == n * geoDim_, ErrorKind::InvalidArgument,
          "control grid size does not match the knot vectors");
  if (!weights_.empty()) {
    require(static_cast<int>(weights_.size()) == n, ErrorKind::InvalidArgument,
            "weight count does not match control point count");
    for (double w : weights_)
      require(w > 0.0, ErrorKind::InvalidArgument, "NURBS weights must be strictly positive");
  }
}

int TensorPatch::controlCount() const {
  int n = 1;
  for (const auto& kv : knots_)
    n *= kv.basisCount();
  return n;
}

int TensorPatch::flatIndex(const std::array<int, 3>& idx) const {
  int flat = 0, stride = 1;
  for (int d = 0; d < parDim(); ++d) {
    flat += idx[d] * stride;
    stride *= count(d);
  }
  return flat;
}

std::array<int, 3> TensorPatch::gridIndex(int flat) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int d = 0; d < parDim(); ++d) {
    idx[d] = flat % count(d);
    flat /= count(d);
  }
  return idx;
}

void TensorPatch::checkParams(std::span<const double> params) const {
  require(static_cast<int>(params.size()) == parDim(), ErrorKind::InvalidArgument,
          "parameter point has the wrong dimension");
  for (int d = 0; d < parDim(); ++d)
    require(knots_[d].contains(params[d]), ErrorKind::InvalidArgument, "parameter outside patch box");
}

void evalTensorBasis(const TensorPatch& patch, std::span<const double> params, int order, TensorBasisEval& out) {
  patch.checkParams(params);
  const int pd = patch.parDim();
  const int deriv = order > 0 ? 1 : 0;
  double uni[3][2 * (kMaxDegree + 1)];
  int first[3] = {0, 0, 0};
  int nloc[3] = {1, 1, 1};
  for (int d = 0; d < pd; ++d) {
    const KnotVector& kv = patch.knots(d);
    const int dd = std::min(deriv, kv.degree());
    first[d] = kv.evalInto(params[d], dd, uni[d]);
    nloc[d] = kv.degree() + 1;
    if (dd < deriv)
      for (int j = 0; j < nloc[d]; ++j)
        uni[d][nloc[d] + j] = 0.0;
  }
  const int nact = nloc[0] * nloc[1] * nloc[2];
  out.indices.resize(nact);
  out.values.resize(nact);
  if (deriv)
    out.grads.resize(pd, nact);
  else
    out.grads.resize(0, 0);

  int stride1 = patch.count(0);
  int stride2 = pd > 1 ? stride1 * patch.count(1) : 0;
  int a = 0;
  for (int k = 0; k < nloc[2]; ++k)
    for (int j = 0; j < nloc[1]; ++j)
      for (int i = 0; i < nloc[0]; ++i, ++a) {
        int flat = first[0] + i;
        if (pd > 1)
          flat += (first[1] + j) * stride1;
        if (pd > 2)
          flat += (first[2] + k) * stride2;
        out.indices[a] = flat;
        const double n0 = uni[0][i];
        const double n1 = pd > 1 ? uni[1][j] : 1.0;
        const double n2 = pd > 2 ? uni[2][k] : 1.0;
        out.values[a] = n0 * n1 * n2;
        if (deriv) {
          out.grads(0, a) = uni[0][nloc[0] + i] * n1 * n2;
          if (pd > 1)
            out.grads(1, a) = n0 * uni[1][nloc[1] + j] * n2;
          if (pd > 2)
            out.grads(2, a) = n0 * n1 * uni[2][nloc[2] + k];
        }
      }

  if (!patch.rational())
    return;
  double W = 0.0;
  double dW[3] = {0.0, 0.0, 0.0};
  for (int b = 0; b < nact; ++b) {
    const double w = patch.weight(out.indices[b]);
    W += w * out.values[b];
    if (deriv)
      for (int d = 0; d < pd; ++d)
        dW[d] += w * out.grads(d, b);
  }
  for (int b = 0; b < nact; ++b) {
    const double w = patch.weight(out.indices[b]);
    const double n = out.values[b];
    out.values[b] = w * n / W;
    if (deriv)
      for (int d = 0; d < pd; ++d)
        out.grads(d, b) = w * (out.grads(d, b) * W - n * dW[d]) / (W * W);
  }
}

Eigen::VectorXd TensorPatch::eval(std::span<const double> params) const {
  TensorBasisEval be;
  evalTensorBasis(*this, params, 0, be);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(geoDim_);
  for (std::size_t a = 0; a < be.indices.size(); ++a) {
    const auto cp = controlPoint(be.indices[a]);
    for (int c = 0; c < geoDim_; ++c)
      x[c] += be.values[a] * cp[c];
  }
  return x;
}

Eigen::MatrixXd TensorPatch::jacobian(std::span<const double> params) const {
  TensorBasisEval be;
  evalTensorBasis(*this, params, 1, be);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(geoDim_, parDim());
  for (std::size_t a = 0; a < be.indices.size(); ++a) {
    const auto cp = controlPoint(be.indices[a]);
    for (int c = 0; c < geoDim_; ++c)
      for (int d = 0; d < parDim(); ++d)
        J(c, d) += be.grads(d, a) * cp[c];
  }
  return J;
}

TensorPatch TensorPatch::insertKnot(int dir, double t) const {
  require(dir >= 0 && dir < parDim(), ErrorKind::InvalidArgument, "knot insertion direction out of range");
  const KnotVector& kv = knots_[dir];
  require(t > kv.knots().front() && t < kv.knots().back(), ErrorKind::InvalidArgument,
          "inserted knot must be interior to the domain");
  const int p = kv.degree();
  require(kv.multiplicity(t) + 1 <= p, ErrorKind::InvalidArgument,
          "knot insertion would raise the multiplicity above the degree");
  const int span = kv.findSpan(t);
  const auto& U = kv.knots();
  KnotVector newKv = kv.withInsertedKnot(t);

  const bool rat = rational();
  const int hd = geoDim_ + (rat ? 1 : 0);
  const int nOld = count(dir);
  std::vector<int> newCount(parDim());
  for (int d = 0; d < parDim(); ++d)
    newCount[d] = d == dir ? nOld + 1 : count(d);
  const int newTotal = controlCount() / nOld * (nOld + 1);

  std::vector<double> alpha(nOld + 1, 0.0);
  for (int i = 0; i <= nOld; ++i) {
    if (i <= span - p)
      alpha[i] = 1.0;
    else if (i >= span + 1)
      alpha[i] = 0.0;
    else
      alpha[i] = (t - U[i]) / (U[i + p] - U[i]);
  }

  // Fibers along dir: stride of dir in old and new layouts.
  int strideOld = 1, strideNew = 1;
  for (int d = 0; d < dir; ++d) {
    strideOld *= count(d);
    strideNew *= newCount[d];
  }
  const int inner = strideOld;
  const int outer = controlCount() / (strideOld * nOld);

  std::vector<double> newCoefs(static_cast<std::size_t>(newTotal) * geoDim_);
  std::vector<double> newWeights(rat ? newTotal : 0);
  std::vector<double> q(static_cast<std::size_t>(nOld) * hd), nq(static_cast<std::size_t>(nOld + 1) * hd);
  for (int o = 0; o < outer; ++o) {
    for (int in = 0; in < inner; ++in) {
      for (int i = 0; i < nOld; ++i) {
        const int flat = in + i * strideOld + o * strideOld * nOld;
        const double w = weight(flat);
        for (int c = 0; c < geoDim_; ++c)
          q[i * hd + c] = coefs_[static_cast<std::size_t>(flat) * geoDim_ + c] * (rat ? w : 1.0);
        if (rat)
          q[i * hd + geoDim_] = w;
      }
      for (int i = 0; i <= nOld; ++i) {
        for (int c = 0; c < hd; ++c) {
          if (alpha[i] == 1.0)
            nq[i * hd + c] = q[i * hd + c];
          else if (alpha[i] == 0.0)
            nq[i * hd + c] = q[(i - 1) * hd + c];
          else
            nq[i * hd + c] = alpha[i] * q[i * hd + c] + (1.0 - alpha[i]) * q[(i - 1) * hd + c];
        }
      }
      for (int i = 0; i <= nOld; ++i) {
        const int flat = in + i * strideNew + o * strideNew * (nOld + 1);
        const double w = rat ? nq[i * hd + geoDim_] : 1.0;
        for (int c = 0; c < geoDim_; ++c)
          newCoefs[static_cast<std::size_t>(flat) * geoDim_ + c] = nq[i * hd + c] / w;
        if (rat)
          newWeights[flat] = w;
      }
    }
  }
  std::vector<KnotVector> kvs = knots_;
  kvs[dir] = std::move(newKv);
  return TensorPatch(std::move(kvs), geoDim_, std::move(newCoefs), std::move(newWeights));
}

TensorPatch TensorPatch::uniformRefine(int times) const {
  require(times >= 1, ErrorKind::InvalidArgument, "uniform refinement needs times >= 1");
  TensorPatch out = *this;
  for (int r = 0; r < times; ++r) {
    for (int d = 0; d < parDim(); ++d) {
      const auto br = out.knots(d).breaks();
      for (std::size_t e = 0; e + 1 < br.size(); ++e)
        out = out.insertKnot(d, 0.5 * (br[e] + br[e + 1]));
    }
  }
  return out;
}

std::vector<int> TensorPatch::sideIndices(int side) const {
  const int dir = side / 2;
  require(dir >= 0 && dir < parDim(), ErrorKind::InvalidArgument, "side index out of range");
  const int fixed = (side % 2 == 0) ? 0 : count(dir) - 1;
  std::vector<int> out;
  std::array<int, 3> idx{0, 0, 0};
  std::array<int, 3> n{1, 1, 1};
  for (int d = 0; d < parDim(); ++d)
    n[d] = count(d);
  n[dir] = 1;
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i) {
        idx = {i, j, k};
        idx[dir] = fixed;
        out.push_back(flatIndex(idx));
      }
  return out;
}

TensorPatch TensorPatch::sidePatch(int side) const {
  require(parDim() >= 2, ErrorKind::InvalidArgument, "side patches need a parametric dimension of at least 2");
  const int dir = side / 2;
  const auto idx = sideIndices(side);
  std::vector<KnotVector> kvs;
  for (int d = 0; d < parDim(); ++d)
    if (d != dir)
      kvs.push_back(knots_[d]);
  std::vector<double> c;
  std::vector<double> w;
  c.reserve(idx.size() * geoDim_);
  for (int i : idx) {
    const auto cp = controlPoint(i);
    c.insert(c.end(), cp.begin(), cp.end());
    if (rational())
      w.push_back(weights_[i]);
  }
  return TensorPatch(std::move(kvs), geoDim_, std::move(c), std::move(w));
}

TensorPatch TensorPatch::withCoefs(std::vector<double> coefs) const {
  return TensorPatch(knots_, geoDim_, std::move(coefs), weights_);
}

std::vector<Eigen::VectorXd> evalCurveDerivatives(const TensorPatch& curve, double t, int upTo) {
  require(curve.parDim() == 1, ErrorKind::InvalidArgument, "curve derivatives need a univariate patch");
  require(upTo >= 0 && upTo <= 2, ErrorKind::InvalidArgument, "curve derivative order must lie in [0, 2]");
  const KnotVector& kv = curve.knots(0);
  require(kv.contains(t), ErrorKind::InvalidArgument, "parameter outside curve domain");
  const int p = kv.degree();
  const int k = std::min(upTo, p);
  double buf[3 * (kMaxDegree + 1)];
  const int first = kv.evalInto(t, k, buf);
  const int gd = curve.geoDim();
  // Homogeneous derivatives A^(j) and w^(j).
  std::vector<Eigen::VectorXd> A(upTo + 1, Eigen::VectorXd::Zero(gd));
  double w[3] = {0.0, 0.0, 0.0};
  for (int j = 0; j <= k; ++j) {
    for (int a = 0; a <= p; ++a) {
      const double n = buf[j * (p + 1) + a];
      const int idx = first + a;
      const double wi = curve.weight(idx);
      const auto cp = curve.controlPoint(idx);
      for (int c = 0; c < gd; ++c)
        A[j][c] += n * wi * cp[c];
      w[j] += n * wi;
    }
  }
  std::vector<Eigen::VectorXd> out(upTo + 1);
  out[0] = A[0] / w[0];
  if (upTo >= 1)
    out[1] = (A[1] - w[1] * out[0]) / w[0];
  if (upTo >= 2)
    out[2] = (A[2] - 2.0 * w[1] * out[1] - w[2] * out[0]) / w[0];
  return out;
}

} // namespace screwiga
