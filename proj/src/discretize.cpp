#include "screwiga/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#ifdef SCREWIGA_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include "screwiga/error.hpp"
#include "screwiga/parallel.hpp"

namespace screwiga {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b)
      parent[std::max(a, b)] = std::min(a, b);
  }
};

double modelScale(const MultiPatchModel& m) {
  double s = 0.0;
  for (const auto& p : m.patches)
    for (double c : p.coefs())
      s = std::max(s, std::abs(c));
  return s;
}

// Geometry and basis at one parameter point.
struct PointEval {
  TensorBasisEval basis;
  Eigen::VectorXd x;
  Eigen::MatrixXd J;      // geoDim x parDim
  Eigen::MatrixXd G;      // geoDim x nActive physical gradients
  double detJ = 0.0;
};

void evalPoint(const TensorPatch& patch, std::span<const double> u, bool withGrads, PointEval& pe) {
  evalTensorBasis(patch, u, withGrads ? 1 : 0, pe.basis);
  const int gd = patch.geoDim(), pd = patch.parDim();
  const int n = static_cast<int>(pe.basis.indices.size());
  pe.x.setZero(gd);
  if (withGrads)
    pe.J.setZero(gd, pd);
  for (int a = 0; a < n; ++a) {
    const auto cp = patch.controlPoint(pe.basis.indices[a]);
    const Eigen::Map<const Eigen::VectorXd> P(cp.data(), gd);
    pe.x.noalias() += pe.basis.values[a] * P;
    if (withGrads)
      pe.J.noalias() += P * pe.basis.grads.col(a).transpose();
  }
  if (withGrads && gd == pd) {
    pe.detJ = pe.J.determinant();
    if (std::abs(pe.detJ) >= 1e-14)
      pe.G.noalias() = pe.J.transpose().inverse() * pe.basis.grads;
  }
}

struct Element {
  int patch;
  std::array<double, 3> lo{0, 0, 0};
  std::array<double, 3> hi{0, 0, 0};
};

std::vector<Element> elementsOf(const MultiPatchModel& model) {
  std::vector<Element> out;
  for (int p = 0; p < static_cast<int>(model.patches.size()); ++p) {
    const auto& patch = model.patches[p];
    const int pd = patch.parDim();
    std::array<std::vector<double>, 3> br;
    std::array<int, 3> ne{1, 1, 1};
    for (int d = 0; d < pd; ++d) {
      br[d] = patch.knots(d).breaks();
      ne[d] = static_cast<int>(br[d].size()) - 1;
    }
    for (int k = 0; k < ne[2]; ++k)
      for (int j = 0; j < ne[1]; ++j)
        for (int i = 0; i < ne[0]; ++i) {
          Element e{p};
          const int idx[3] = {i, j, k};
          for (int d = 0; d < pd; ++d) {
            e.lo[d] = br[d][idx[d]];
            e.hi[d] = br[d][idx[d] + 1];
          }
          out.push_back(e);
        }
  }
  return out;
}

int maxDegree(const MultiPatchModel& model) {
  int p = 1;
  for (const auto& patch : model.patches)
    for (int d = 0; d < patch.parDim(); ++d)
      p = std::max(p, patch.knots(d).degree());
  return p;
}

int quadPoints(const MultiPatchModel& model, int requested) {
  return requested > 0 ? requested : maxDegree(model) + 1;
}

[[noreturn]] void singularJacobian(int patch, std::span<const double> u, double det) {
  std::ostringstream os;
  os << "singular Jacobian (det " << det << ") at patch " << patch << " parameters (";
  for (std::size_t i = 0; i < u.size(); ++i)
    os << (i ? ", " : "") << u[i];
  os << ")";
  fail(ErrorKind::Assembly, os.str());
}

// Local element contributions computed in parallel batches and merged in element order.
struct LocalResult {
  int patch = 0;
  std::vector<int> indices;   // patch-local flat indices of active functions
  Eigen::MatrixXd K;
  Eigen::VectorXd F;
};

using LocalKernel = std::function<void(const Element&, PointEval&, LocalResult&)>;

void runElements(const MultiPatchModel& model, const LocalKernel& kernel,
                 const std::function<void(const LocalResult&)>& merge) {
  const auto elements = elementsOf(model);
  constexpr std::size_t batch = 256;
  std::vector<LocalResult> results;
  for (std::size_t b0 = 0; b0 < elements.size(); b0 += batch) {
    const std::size_t nb = std::min(batch, elements.size() - b0);
    results.assign(nb, LocalResult{});
    parallelChunks(nb, [&](std::size_t b, std::size_t e, int) {
      PointEval pe;
      for (std::size_t i = b; i < e; ++i)
        kernel(elements[b0 + i], pe, results[i]);
    });
    for (const auto& r : results)
      merge(r);
  }
}

// Active functions of an element: all functions supported on its parameter box.
std::vector<int> elementIndices(const TensorPatch& patch, const Element& e) {
  std::array<double, 3> mid{};
  for (int d = 0; d < patch.parDim(); ++d)
    mid[d] = 0.5 * (e.lo[d] + e.hi[d]);
  TensorBasisEval ev;
  evalTensorBasis(patch, std::span<const double>(mid.data(), patch.parDim()), 0, ev);
  return ev.indices;
}

class SparseBuilder {
public:
  SparseBuilder(const DiscreteSpace& space) : space_(space) {
    const int ns = space.scalarCount();
    std::vector<std::vector<int>> nbr(ns);
    std::vector<std::size_t> lastUnique(ns, 0);
    for (const auto& e : elementsOf(space.model())) {
      const auto local = elementIndices(space.model().patches[e.patch], e);
      std::vector<int> sc(local.size());
      for (std::size_t a = 0; a < local.size(); ++a)
        sc[a] = space.scalarIndex(e.patch, local[a]);
      std::sort(sc.begin(), sc.end());
      sc.erase(std::unique(sc.begin(), sc.end()), sc.end());
      for (int s : sc) {
        auto& row = nbr[s];
        row.insert(row.end(), sc.begin(), sc.end());
        if (row.size() > 2 * lastUnique[s] + 1024) {
          std::sort(row.begin(), row.end());
          row.erase(std::unique(row.begin(), row.end()), row.end());
          lastUnique[s] = row.size();
        }
      }
    }
    for (auto& row : nbr) {
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    const int nc = space.components();
    const int nf = space.freeCount();
    matrix_.resize(nf, nf);
    std::vector<int> outer(nf + 1, 0);
    for (int c = 0; c < nc; ++c)
      for (int s = 0; s < ns; ++s) {
        const int fr = space.freeIndex(space.globalDof(s, c));
        if (fr < 0)
          continue;
        int cnt = 0;
        for (int c2 = 0; c2 < nc; ++c2)
          for (int s2 : nbr[s])
            cnt += space.freeIndex(space.globalDof(s2, c2)) >= 0;
        outer[fr + 1] = cnt;
      }
    for (int i = 0; i < nf; ++i)
      outer[i + 1] += outer[i];
    matrix_.resizeNonZeros(outer[nf]);
    std::copy(outer.begin(), outer.end(), matrix_.outerIndexPtr());
    int* inner = matrix_.innerIndexPtr();
    for (int c = 0; c < nc; ++c)
      for (int s = 0; s < ns; ++s) {
        const int fr = space.freeIndex(space.globalDof(s, c));
        if (fr < 0)
          continue;
        int pos = outer[fr];
        for (int c2 = 0; c2 < nc; ++c2)
          for (int s2 : nbr[s]) {
            const int fc = space.freeIndex(space.globalDof(s2, c2));
            if (fc >= 0)
              inner[pos++] = fc;
          }
      }
    std::fill(matrix_.valuePtr(), matrix_.valuePtr() + outer[nf], 0.0);
    rhs_ = Eigen::VectorXd::Zero(nf);
  }

  // Adds a local matrix with rows/cols ordered component-major over `indices`.
  void add(const LocalResult& r) {
    const int n = static_cast<int>(r.indices.size());
    const int nc = space_.components();
    const auto& g = space_.dirichletValues();
    std::vector<int> gdof(n * nc);
    for (int c = 0; c < nc; ++c)
      for (int a = 0; a < n; ++a)
        gdof[c * n + a] = space_.globalDof(space_.scalarIndex(r.patch, r.indices[a]), c);
    const int* outer = matrix_.outerIndexPtr();
    const int* inner = matrix_.innerIndexPtr();
    double* val = matrix_.valuePtr();
    for (int i = 0; i < n * nc; ++i) {
      const int fr = space_.freeIndex(gdof[i]);
      if (fr < 0)
        continue;
      const int* rb = inner + outer[fr];
      const int* re = inner + outer[fr + 1];
      for (int j = 0; j < n * nc; ++j) {
        const double k = r.K(i, j);
        const int fc = space_.freeIndex(gdof[j]);
        if (fc < 0) {
          rhs_[fr] -= k * g[gdof[j]];
          continue;
        }
        const int* it = std::lower_bound(rb, re, fc);
        val[it - inner] += k;
      }
    }
  }

  LinearSystem finish() {
    LinearSystem sys;
    sys.matrix = std::move(matrix_);
    sys.rhs = std::move(rhs_);
    return sys;
  }

private:
  const DiscreteSpace& space_;
  SparseMatrix matrix_;
  Eigen::VectorXd rhs_;
};

void checkVolumeModel(const MultiPatchModel& model) {
  require(!model.patches.empty(), ErrorKind::Assembly, "model has no patches");
  require(model.parDim() == model.geoDim(), ErrorKind::Assembly,
          "volume assembly needs parametric dimension equal to geometric dimension");
}

// Iterates the quadrature points of one element, evaluating geometry and basis.
template <class Fn>
void elementQuadrature(const TensorPatch& patch, int patchIndex, const Element& e, const QuadratureRule& rule,
                       PointEval& pe, Fn&& fn) {
  const int pd = patch.parDim();
  double vol = 1.0;
  for (int d = 0; d < pd; ++d)
    vol *= e.hi[d] - e.lo[d];
  std::array<double, 3> u{};
  for (int q = 0; q < rule.weights.size(); ++q) {
    for (int d = 0; d < pd; ++d)
      u[d] = e.lo[d] + (e.hi[d] - e.lo[d]) * rule.nodes(d, q);
    const std::span<const double> us(u.data(), pd);
    evalPoint(patch, us, true, pe);
    if (std::abs(pe.detJ) < 1e-14)
      singularJacobian(patchIndex, us, pe.detJ);
    fn(us, rule.weights[q] * vol * std::abs(pe.detJ));
  }
}

Eigen::VectorXd assembleVector(const DiscreteSpace& space, int qp,
                               const std::function<void(std::span<const double>, const PointEval&, double, int,
                                                        Eigen::VectorXd&)>& integrand) {
  const auto& model = space.model();
  checkVolumeModel(model);
  const QuadratureRule rule = gaussRule(quadPoints(model, qp), model.parDim());
  const int nc = space.components();
  Eigen::VectorXd full = Eigen::VectorXd::Zero(space.totalCount());
  runElements(
      model,
      [&](const Element& e, PointEval& pe, LocalResult& r) {
        const auto& patch = model.patches[e.patch];
        r.patch = e.patch;
        r.indices = elementIndices(patch, e);
        const int n = static_cast<int>(r.indices.size());
        r.F = Eigen::VectorXd::Zero(n * nc);
        elementQuadrature(patch, e.patch, e, rule, pe,
                          [&](std::span<const double> u, double w) { integrand(u, pe, w, e.patch, r.F); });
      },
      [&](const LocalResult& r) {
        const int n = static_cast<int>(r.indices.size());
        for (int c = 0; c < nc; ++c)
          for (int a = 0; a < n; ++a)
            full[space.globalDof(space.scalarIndex(r.patch, r.indices[a]), c)] += r.F[c * n + a];
      });
  return space.restrict(full);
}

} // namespace

// ---------------------------------------------------------------------------
// Spaces and fields
// ---------------------------------------------------------------------------

DiscreteSpace::DiscreteSpace(std::shared_ptr<const MultiPatchModel> model, int components,
                             const std::vector<DirichletSpec>& dirichlet, const std::vector<VertexPin>& pins)
    : model_(std::move(model)), components_(components) {
  require(model_ != nullptr && !model_->patches.empty(), ErrorKind::InvalidArgument, "space needs a non-empty model");
  require(components >= 1 && components <= 3, ErrorKind::InvalidArgument, "space components must lie in [1, 3]");
  const auto& m = *model_;
  const int np = static_cast<int>(m.patches.size());
  std::vector<int> offset(np + 1, 0);
  for (int p = 0; p < np; ++p)
    offset[p + 1] = offset[p] + m.patches[p].controlCount();
  UnionFind uf(offset[np]);

  for (const auto& itf : m.interfaces) {
    require(itf.a.patch >= 0 && itf.a.patch < np && itf.b.patch >= 0 && itf.b.patch < np, ErrorKind::Assembly,
            "interface references a missing patch");
    const auto& pa = m.patches[itf.a.patch];
    const auto& pb = m.patches[itf.b.patch];
    const auto ia = pa.sideIndices(itf.a.side);
    const auto ib = orientedSideIndices(pb, itf.b.side, itf.flip);
    require(ia.size() == ib.size(), ErrorKind::Assembly, "non-conforming interface: side sizes differ");
    const double tol = 1e-9 * (1.0 + modelScale(m));
    for (std::size_t i = 0; i < ia.size(); ++i) {
      const auto xa = pa.controlPoint(ia[i]);
      const auto xb = pb.controlPoint(ib[i]);
      for (int c = 0; c < pa.geoDim(); ++c)
        require(std::abs(xa[c] - xb[c]) <= tol, ErrorKind::Assembly,
                "non-conforming interface between patch " + std::to_string(itf.a.patch) + " and patch " +
                    std::to_string(itf.b.patch));
      uf.unite(offset[itf.a.patch] + ia[i], offset[itf.b.patch] + ib[i]);
    }
  }
  // Collapsed sides: coincident control points share one function.
  const double ctol = 1e-10 * (1.0 + modelScale(m));
  for (const auto& ds : m.degenerateSides) {
    const auto& patch = m.patches[ds.patch];
    const auto idx = patch.sideIndices(ds.side);
    std::vector<int> reps;
    for (int i : idx) {
      const auto xi = patch.controlPoint(i);
      bool merged = false;
      for (int r : reps) {
        const auto xr = patch.controlPoint(r);
        double d = 0.0;
        for (int c = 0; c < patch.geoDim(); ++c)
          d = std::max(d, std::abs(xi[c] - xr[c]));
        if (d <= ctol) {
          uf.unite(offset[ds.patch] + r, offset[ds.patch] + i);
          merged = true;
          break;
        }
      }
      if (!merged)
        reps.push_back(i);
    }
  }

  std::vector<int> idOfRoot(offset[np], -1);
  scalarOf_.resize(np);
  for (int p = 0; p < np; ++p) {
    scalarOf_[p].resize(m.patches[p].controlCount());
    for (int i = 0; i < m.patches[p].controlCount(); ++i) {
      const int root = uf.find(offset[p] + i);
      if (idOfRoot[root] < 0)
        idOfRoot[root] = scalarCount_++;
      scalarOf_[p][i] = idOfRoot[root];
    }
  }

  const int total = totalCount();
  std::vector<bool> fixed(total, false);
  dirichletValues_ = Eigen::VectorXd::Zero(total);
  for (const auto& spec : dirichlet) {
    const auto& sides = m.boundary(spec.boundary);
    for (const auto& s : sides) {
      const auto& patch = m.patches[s.patch];
      const auto idx = patch.sideIndices(s.side);
      Eigen::MatrixXd values;
      if (spec.value) {
        values.resize(idx.size(), components_);
        if (patch.parDim() == 1) {
          const auto cp = patch.controlPoint(idx[0]);
          values.row(0) = spec.value(Eigen::Map<const Eigen::VectorXd>(cp.data(), patch.geoDim())).transpose();
        } else {
          // Greville interpolation on the side patch.
          const TensorPatch sp = patch.sidePatch(s.side);
          const int n = sp.controlCount();
          std::array<std::vector<double>, 2> g;
          for (int d = 0; d < sp.parDim(); ++d)
            g[d] = sp.knots(d).greville();
          Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
          Eigen::MatrixXd rhs(n, components_);
          TensorBasisEval ev;
          for (int k = 0; k < n; ++k) {
            const auto gi = sp.gridIndex(k);
            std::array<double, 2> u{g[0][gi[0]], sp.parDim() > 1 ? g[1][gi[1]] : 0.0};
            const std::span<const double> us(u.data(), sp.parDim());
            evalTensorBasis(sp, us, 0, ev);
            for (std::size_t a = 0; a < ev.indices.size(); ++a)
              B(k, ev.indices[a]) += ev.values[a];
            const Eigen::VectorXd v = spec.value(sp.eval(us));
            require(v.size() == components_, ErrorKind::InvalidArgument,
                    "Dirichlet value has the wrong number of components");
            rhs.row(k) = v.transpose();
          }
          values = B.partialPivLu().solve(rhs);
        }
      }
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const int sc = scalarOf_[s.patch][idx[k]];
        for (int c = 0; c < components_; ++c) {
          if (!spec.components[c])
            continue;
          fixed[globalDof(sc, c)] = true;
          dirichletValues_[globalDof(sc, c)] = spec.value ? values(k, c) : 0.0;
        }
      }
    }
  }
  for (const auto& pin : pins) {
    bool found = false;
    for (int p = 0; p < np; ++p) {
      const auto& patch = m.patches[p];
      require(pin.point.size() == patch.geoDim(), ErrorKind::InvalidArgument, "pin point has the wrong dimension");
      for (int i = 0; i < patch.controlCount(); ++i) {
        const auto cp = patch.controlPoint(i);
        double d = 0.0;
        for (int c = 0; c < patch.geoDim(); ++c)
          d = std::max(d, std::abs(cp[c] - pin.point[c]));
        if (d > ctol)
          continue;
        found = true;
        for (int c = 0; c < components_; ++c)
          if (pin.components[c]) {
            fixed[globalDof(scalarOf_[p][i], c)] = true;
            dirichletValues_[globalDof(scalarOf_[p][i], c)] = 0.0;
          }
      }
    }
    require(found, ErrorKind::InvalidArgument, "pin point does not coincide with a control point");
  }

  freeOf_.assign(total, -1);
  for (int i = 0; i < total; ++i)
    if (!fixed[i])
      freeOf_[i] = freeCount_++;
}

Eigen::VectorXd DiscreteSpace::expand(const Eigen::VectorXd& freeCoefs) const {
  require(freeCoefs.size() == freeCount_, ErrorKind::InvalidArgument, "coefficient vector has the wrong length");
  Eigen::VectorXd full = dirichletValues_;
  for (int i = 0; i < totalCount(); ++i)
    if (freeOf_[i] >= 0)
      full[i] = freeCoefs[freeOf_[i]];
  return full;
}

Eigen::VectorXd DiscreteSpace::restrict(const Eigen::VectorXd& full) const {
  require(full.size() == totalCount(), ErrorKind::InvalidArgument, "vector has the wrong length");
  Eigen::VectorXd out(freeCount_);
  for (int i = 0; i < totalCount(); ++i)
    if (freeOf_[i] >= 0)
      out[freeOf_[i]] = full[i];
  return out;
}

DiscreteField::DiscreteField(std::shared_ptr<const DiscreteSpace> s, Eigen::VectorXd freeCoefs)
    : space(std::move(s)), coefficients(std::move(freeCoefs)) {
  require(space != nullptr, ErrorKind::InvalidArgument, "field needs a space");
  full = space->expand(coefficients);
}

Eigen::MatrixXd DiscreteField::patchCoefficients(int patch) const {
  const auto& patchRef = space->model().patches.at(patch);
  const int n = patchRef.controlCount();
  const int nc = space->components();
  Eigen::MatrixXd out(n, nc);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < nc; ++c)
      out(i, c) = full[space->globalDof(space->scalarIndex(patch, i), c)];
  return out;
}

Eigen::VectorXd DiscreteField::value(int patch, std::span<const double> params) const {
  const auto& p = space->model().patches.at(patch);
  TensorBasisEval ev;
  evalTensorBasis(p, params, 0, ev);
  const int nc = space->components();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(nc);
  for (std::size_t a = 0; a < ev.indices.size(); ++a)
    for (int c = 0; c < nc; ++c)
      v[c] += ev.values[a] * full[space->globalDof(space->scalarIndex(patch, ev.indices[a]), c)];
  return v;
}

Eigen::MatrixXd DiscreteField::gradient(int patch, std::span<const double> params) const {
  const auto& p = space->model().patches.at(patch);
  require(p.parDim() == p.geoDim(), ErrorKind::InvalidArgument, "gradients need a volume patch");
  PointEval pe;
  evalPoint(p, params, true, pe);
  require(std::abs(pe.detJ) >= 1e-14, ErrorKind::Assembly, "gradient requested at a singular point");
  const int nc = space->components();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nc, p.geoDim());
  for (std::size_t a = 0; a < pe.basis.indices.size(); ++a)
    for (int c = 0; c < nc; ++c)
      g.row(c) += full[space->globalDof(space->scalarIndex(patch, pe.basis.indices[a]), c)] * pe.G.col(a).transpose();
  return g;
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

QuadratureRule gaussRule(int n, int parDim) {
  require(n >= 1, ErrorKind::InvalidArgument, "quadrature needs at least one point");
  require(parDim >= 1 && parDim <= 3, ErrorKind::InvalidArgument, "quadrature dimension must lie in [1, 3]");
  std::vector<double> x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16)
        break;
    }
    {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
    }
    const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
    x[i] = 0.5 * (1.0 - z);
    x[n - 1 - i] = 0.5 * (1.0 + z);
    w[i] = w[n - 1 - i] = 0.5 * wi;
  }
  if (n % 2 == 1)
    x[n / 2] = 0.5;
  int total = 1;
  for (int d = 0; d < parDim; ++d)
    total *= n;
  QuadratureRule rule;
  rule.nodes.resize(parDim, total);
  rule.weights.resize(total);
  for (int q = 0; q < total; ++q) {
    int rem = q;
    double wq = 1.0;
    for (int d = 0; d < parDim; ++d) {
      const int i = rem % n;
      rem /= n;
      rule.nodes(d, q) = x[i];
      wq *= w[i];
    }
    rule.weights[q] = wq;
  }
  return rule;
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

LinearSystem assembleElasticity(const DiscreteSpace& space, double lambda, double mu, const AssemblyOptions& opts) {
  const auto& model = space.model();
  checkVolumeModel(model);
  const int d = model.geoDim();
  require(space.components() == d, ErrorKind::Assembly, "elasticity needs one component per spatial dimension");
  const QuadratureRule rule = gaussRule(quadPoints(model, opts.quadraturePoints), d);
  SparseBuilder builder(space);
  runElements(
      model,
      [&](const Element& e, PointEval& pe, LocalResult& r) {
        const auto& patch = model.patches[e.patch];
        r.patch = e.patch;
        r.indices = elementIndices(patch, e);
        const int n = static_cast<int>(r.indices.size());
        r.K = Eigen::MatrixXd::Zero(n * d, n * d);
        elementQuadrature(patch, e.patch, e, rule, pe, [&](std::span<const double>, double w) {
          const Eigen::MatrixXd& G = pe.G;
          const Eigen::MatrixXd GtG = w * mu * (G.transpose() * G);
          for (int i = 0; i < d; ++i) {
            r.K.block(i * n, i * n, n, n) += GtG;
            for (int j = 0; j < d; ++j)
              r.K.block(i * n, j * n, n, n).noalias() +=
                  (w * lambda) * G.row(i).transpose() * G.row(j) + (w * mu) * G.row(j).transpose() * G.row(i);
          }
        });
      },
      [&](const LocalResult& r) { builder.add(r); });
  LinearSystem sys = builder.finish();
  if (space.constrainedCount() == 0)
    sys.warnings.push_back("no Dirichlet conditions: rigid-body modes remain in the kernel");
  return sys;
}

LinearSystem assembleLaplace(const DiscreteSpace& space, double kappa, const AssemblyOptions& opts) {
  const auto& model = space.model();
  checkVolumeModel(model);
  require(space.components() == 1, ErrorKind::Assembly, "Laplace assembly needs a scalar space");
  const QuadratureRule rule = gaussRule(quadPoints(model, opts.quadraturePoints), model.parDim());
  SparseBuilder builder(space);
  runElements(
      model,
      [&](const Element& e, PointEval& pe, LocalResult& r) {
        const auto& patch = model.patches[e.patch];
        r.patch = e.patch;
        r.indices = elementIndices(patch, e);
        const int n = static_cast<int>(r.indices.size());
        r.K = Eigen::MatrixXd::Zero(n, n);
        elementQuadrature(patch, e.patch, e, rule, pe, [&](std::span<const double>, double w) {
          r.K.noalias() += (w * kappa) * (pe.G.transpose() * pe.G);
        });
      },
      [&](const LocalResult& r) { builder.add(r); });
  LinearSystem sys = builder.finish();
  if (space.constrainedCount() == 0)
    sys.warnings.push_back("no Dirichlet conditions: constants remain in the kernel");
  return sys;
}

Eigen::VectorXd assembleThermalLoad(const DiscreteSpace& space, double lambda, double mu, double alpha, double T0,
                                    const ScalarFunction& temperature, const AssemblyOptions& opts) {
  const int d = space.model().geoDim();
  require(space.components() == d, ErrorKind::Assembly, "thermal load needs a vector space");
  require(static_cast<bool>(temperature), ErrorKind::Assembly, "temperature field is not evaluable");
  const double factor = (2.0 * mu + d * lambda) * alpha;
  return assembleVector(space, opts.quadraturePoints,
                        [&](std::span<const double> u, const PointEval& pe, double w, int patch, Eigen::VectorXd& F) {
                          const double T = temperature(patch, u, pe.x);
                          require(std::isfinite(T), ErrorKind::Assembly, "temperature is not finite");
                          const double s = w * factor * (T - T0);
                          if (s == 0.0)
                            return;
                          const int n = static_cast<int>(pe.G.cols());
                          for (int i = 0; i < d; ++i)
                            F.segment(i * n, n) += s * pe.G.row(i).transpose();
                        });
}

Eigen::VectorXd assembleBodyLoad(const DiscreteSpace& space, const VectorFunction& force, const AssemblyOptions& opts) {
  const int nc = space.components();
  return assembleVector(space, opts.quadraturePoints,
                        [&](std::span<const double>, const PointEval& pe, double w, int, Eigen::VectorXd& F) {
                          const Eigen::VectorXd f = force(pe.x);
                          require(f.size() == nc, ErrorKind::Assembly, "body force has the wrong number of components");
                          const int n = static_cast<int>(pe.basis.values.size());
                          const Eigen::Map<const Eigen::VectorXd> R(pe.basis.values.data(), n);
                          for (int c = 0; c < nc; ++c)
                            F.segment(c * n, n) += (w * f[c]) * R;
                        });
}

void forEachQuadraturePoint(const MultiPatchModel& model, int pointsPerDirection,
                            const std::function<void(const QuadraturePoint&)>& fn) {
  checkVolumeModel(model);
  const QuadratureRule rule = gaussRule(quadPoints(model, pointsPerDirection), model.parDim());
  PointEval pe;
  for (const auto& e : elementsOf(model)) {
    const auto& patch = model.patches[e.patch];
    elementQuadrature(patch, e.patch, e, rule, pe,
                      [&](std::span<const double> u, double w) { fn(QuadraturePoint{e.patch, u, pe.x, w}); });
  }
}

void forEachSideQuadraturePoint(const MultiPatchModel& model, const SideRef& side, int pointsPerDirection,
                                const std::function<void(const SideQuadraturePoint&)>& fn) {
  checkVolumeModel(model);
  require(side.patch >= 0 && side.patch < static_cast<int>(model.patches.size()), ErrorKind::InvalidArgument,
          "side references a missing patch");
  const auto& patch = model.patches[side.patch];
  const int pd = patch.parDim();
  const int dir = side.side / 2;
  const double fixedParam = side.side % 2 == 0 ? 0.0 : 1.0;
  std::vector<int> tang;
  for (int d = 0; d < pd; ++d)
    if (d != dir)
      tang.push_back(d);
  const int nt = static_cast<int>(tang.size());
  const QuadratureRule rule = gaussRule(quadPoints(model, pointsPerDirection), std::max(nt, 1));
  std::array<std::vector<double>, 2> br;
  std::array<int, 2> ne{1, 1};
  for (int t = 0; t < nt; ++t) {
    br[t] = patch.knots(tang[t]).breaks();
    ne[t] = static_cast<int>(br[t].size()) - 1;
  }
  PointEval pe;
  Eigen::VectorXd normal;
  std::array<double, 3> u{};
  u[dir] = fixedParam;
  for (int j = 0; j < ne[1]; ++j)
    for (int i = 0; i < ne[0]; ++i) {
      const int ei[2] = {i, j};
      double area = 1.0;
      for (int t = 0; t < nt; ++t)
        area *= br[t][ei[t] + 1] - br[t][ei[t]];
      const int nq = nt == 0 ? 1 : static_cast<int>(rule.weights.size());
      for (int q = 0; q < nq; ++q) {
        for (int t = 0; t < nt; ++t)
          u[tang[t]] = br[t][ei[t]] + (br[t][ei[t] + 1] - br[t][ei[t]]) * rule.nodes(t, q);
        const std::span<const double> us(u.data(), pd);
        evalPoint(patch, us, true, pe);
        if (std::abs(pe.detJ) < 1e-14)
          singularJacobian(side.patch, us, pe.detJ);
        // Nanson: n dS = det J * J^{-T} e_dir dxi_tangential
        const Eigen::VectorXd m = pe.J.transpose().inverse().col(dir);
        const double sign = (side.side % 2 == 0 ? -1.0 : 1.0) * (pe.detJ > 0 ? 1.0 : -1.0);
        const double len = m.norm();
        normal = sign * m / len;
        const double w = (nt == 0 ? 1.0 : rule.weights[q] * area) * std::abs(pe.detJ) * len;
        fn(SideQuadraturePoint{side.patch, side.side, us, pe.x, normal, w});
      }
    }
}

namespace {

Eigen::VectorXd assembleSideLoad(const DiscreteSpace& space, const std::string& boundary, int qp,
                                 const std::function<Eigen::VectorXd(const SideQuadraturePoint&)>& density) {
  const auto& model = space.model();
  const auto& sides = model.boundary(boundary);
  const int nc = space.components();
  Eigen::VectorXd full = Eigen::VectorXd::Zero(space.totalCount());
  TensorBasisEval ev;
  for (const auto& s : sides) {
    const auto& patch = model.patches[s.patch];
    forEachSideQuadraturePoint(model, s, qp, [&](const SideQuadraturePoint& q) {
      const Eigen::VectorXd f = density(q);
      evalTensorBasis(patch, q.params, 0, ev);
      for (std::size_t a = 0; a < ev.indices.size(); ++a) {
        const int sc = space.scalarIndex(s.patch, ev.indices[a]);
        for (int c = 0; c < nc; ++c)
          full[space.globalDof(sc, c)] += q.weight * f[c] * ev.values[a];
      }
    });
  }
  return space.restrict(full);
}

} // namespace

Eigen::VectorXd assembleTractionLoad(const DiscreteSpace& space, const std::string& boundary,
                                     const Eigen::VectorXd& traction, const AssemblyOptions& opts) {
  require(traction.size() == space.components(), ErrorKind::InvalidArgument, "traction has the wrong number of components");
  return assembleSideLoad(space, boundary, opts.quadraturePoints, [&](const SideQuadraturePoint&) { return traction; });
}

Eigen::VectorXd assemblePressureLoad(const DiscreteSpace& space, const std::string& boundary, double pressure,
                                     const AssemblyOptions& opts) {
  require(space.components() == space.model().geoDim(), ErrorKind::InvalidArgument, "pressure needs a vector space");
  return assembleSideLoad(space, boundary, opts.quadraturePoints,
                          [&](const SideQuadraturePoint& q) -> Eigen::VectorXd { return -pressure * q.normal; });
}

ErrorNorms errorNorms(const DiscreteField& field, const VectorFunction& exact,
                      const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& exactGradient,
                      int pointsPerDirection) {
  const auto& space = *field.space;
  const auto& model = space.model();
  checkVolumeModel(model);
  const int nc = space.components();
  const QuadratureRule rule = gaussRule(quadPoints(model, pointsPerDirection) + 1, model.parDim());
  double l2 = 0.0, h1 = 0.0;
  PointEval pe;
  for (const auto& e : elementsOf(model)) {
    const auto& patch = model.patches[e.patch];
    elementQuadrature(patch, e.patch, e, rule, pe, [&](std::span<const double>, double w) {
      Eigen::VectorXd uh = Eigen::VectorXd::Zero(nc);
      Eigen::MatrixXd gh = Eigen::MatrixXd::Zero(nc, model.geoDim());
      for (std::size_t a = 0; a < pe.basis.indices.size(); ++a) {
        const int sc = space.scalarIndex(e.patch, pe.basis.indices[a]);
        for (int c = 0; c < nc; ++c) {
          const double q = field.full[space.globalDof(sc, c)];
          uh[c] += q * pe.basis.values[a];
          gh.row(c) += q * pe.G.col(a).transpose();
        }
      }
      l2 += w * (uh - exact(pe.x)).squaredNorm();
      if (exactGradient)
        h1 += w * (gh - exactGradient(pe.x)).squaredNorm();
    });
  }
  return {std::sqrt(l2), std::sqrt(h1)};
}

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

struct SpdSolver::Impl {
  const SparseMatrix* A = nullptr;
  SolverOptions opts;
  std::string method;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double, Eigen::ColMajor, int>> ldlt;
#ifdef SCREWIGA_HAVE_CHOLMOD
  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double, Eigen::ColMajor, int>, Eigen::Lower> llt;
#endif
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                           Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>>>
      cgIc;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cgDiag;
};

SpdSolver::SpdSolver(const SparseMatrix& matrix, const SolverOptions& opts) : impl_(std::make_unique<Impl>()) {
  require(matrix.rows() == matrix.cols(), ErrorKind::Solver, "matrix is not square");
  impl_->A = &matrix;
  impl_->opts = opts;
  const bool direct = opts.method == SolverMethod::Direct ||
                      (opts.method == SolverMethod::Auto && matrix.rows() <= opts.directLimit);
  if (matrix.rows() == 0) {
    impl_->method = "none";
    return;
  }
  if (direct) {
#ifdef SCREWIGA_HAVE_CHOLMOD
    if (matrix.rows() > 2000) {
      const Eigen::SparseMatrix<double, Eigen::ColMajor, int> lower = matrix.triangularView<Eigen::Lower>();
      impl_->llt.compute(lower);
      if (impl_->llt.info() == Eigen::Success) {
        impl_->method = "cholmod";
        return;
      }
      // Fall through: the LDLT path names the failing pivot.
    }
#endif
    impl_->method = "ldlt";
    impl_->ldlt.compute(matrix);
    if (impl_->ldlt.info() != Eigen::Success)
      fail(ErrorKind::Solver, "matrix not SPD: symmetric factorization failed");
    const auto D = impl_->ldlt.vectorD();
    Eigen::Index at = 0;
    const double dmin = D.minCoeff(&at);
    if (!(dmin > 0.0)) {
      std::ostringstream os;
      os << "matrix not SPD: pivot " << dmin << " at position " << at
         << " (check that boundary conditions remove all rigid-body modes)";
      fail(ErrorKind::Solver, os.str());
    }
    return;
  }
  impl_->method = "cg-ichol";
  impl_->cgIc.setTolerance(0.1 * opts.tolerance);
  impl_->cgIc.setMaxIterations(opts.maxIterations);
  impl_->cgIc.compute(matrix);
  if (impl_->cgIc.info() != Eigen::Success) {
    impl_->method = "cg-jacobi";
    impl_->cgDiag.setTolerance(0.1 * opts.tolerance);
    impl_->cgDiag.setMaxIterations(opts.maxIterations);
    impl_->cgDiag.compute(matrix);
  }
}

SpdSolver::~SpdSolver() = default;

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& rhs, SolveReport* report) const {
  const auto& A = *impl_->A;
  require(rhs.size() == A.rows(), ErrorKind::Solver, "rhs has the wrong length");
  SolveReport rep;
  rep.method = impl_->method;
  const double bnorm = rhs.norm();
  Eigen::VectorXd q = Eigen::VectorXd::Zero(rhs.size());
  if (bnorm == 0.0 || A.rows() == 0) {
    if (report)
      *report = rep;
    return q;
  }
  auto residual = [&](const Eigen::VectorXd& x) { return (rhs - A * x).eval(); };
  if (impl_->method == "ldlt" || impl_->method == "cholmod") {
    auto direct = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
#ifdef SCREWIGA_HAVE_CHOLMOD
      if (impl_->method == "cholmod")
        return impl_->llt.solve(b);
#endif
      return impl_->ldlt.solve(b);
    };
    q = direct(rhs);
    Eigen::VectorXd r = residual(q);
    for (int it = 0; it < 3 && r.norm() > impl_->opts.tolerance * bnorm; ++it) {
      q += direct(r);
      r = residual(q);
      ++rep.iterations;
    }
  } else if (impl_->method == "cg-ichol") {
    q = impl_->cgIc.solve(rhs);
    rep.iterations = static_cast<int>(impl_->cgIc.iterations());
  } else {
    q = impl_->cgDiag.solve(rhs);
    rep.iterations = static_cast<int>(impl_->cgDiag.iterations());
  }
  rep.relativeResidual = residual(q).norm() / bnorm;
  if (report)
    *report = rep;
  if (!std::isfinite(rep.relativeResidual))
    fail(ErrorKind::Solver, "solver produced non-finite values (" + rep.method + ")");
  if (rep.relativeResidual > impl_->opts.tolerance) {
    std::ostringstream os;
    os << "solver did not reach the residual target: " << rep.method << " relative residual " << rep.relativeResidual
       << " after " << rep.iterations << " iterations";
    fail(ErrorKind::Solver, os.str());
  }
  return q;
}

Eigen::VectorXd solve(const LinearSystem& system, const SolverOptions& opts, SolveReport* report) {
  SpdSolver s(system.matrix, opts);
  return s.solve(system.rhs, report);
}

void writeMatrixMarket(const SparseMatrix& matrix, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << matrix.rows() << ' ' << matrix.cols() << ' ' << matrix.nonZeros() << '\n';
  char buf[64];
  for (int r = 0; r < matrix.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(matrix, r); it; ++it) {
      std::snprintf(buf, sizeof buf, "%.17g", it.value());
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << buf << '\n';
    }
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

} // namespace screwiga
