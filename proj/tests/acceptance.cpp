// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit when any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "oracles.hpp"
#include "scenarios.hpp"
#include "screwiga/geomgen.hpp"
#include "screwiga/pipeline.hpp"
#include "screwiga/serialize.hpp"

using namespace screwiga;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome splineKernel() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd;
  double pou = 0.0, fd = 0.0, refine = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int p = 1 + trial % 4;
    const auto kv = oracle::randomKnots(rng, p, 1 + trial % 9);
    const auto br = kv.breaks();
    for (int s = 0; s < 50; ++s) {
      const double t = u(rng);
      const auto b = kv.evalBasisDerivatives(t, 1);
      pou = std::max(pou, std::abs(b.values.row(0).sum() - 1.0));
    }
    for (int s = 0; s < 20; ++s) {
      const int e = std::uniform_int_distribution<int>(0, static_cast<int>(br.size()) - 2)(rng);
      const double a = br[e], c = br[e + 1];
      const double t = a + (c - a) * (0.2 + 0.6 * u(rng)), h = 1e-6 * (c - a);
      const auto d = kv.evalBasisDerivatives(t, 1);
      const auto lo = kv.evalBasis(t - h), hi = kv.evalBasis(t + h);
      double scale = 0.0, err = 0.0;
      for (int j = 0; j <= p; ++j) {
        const double f = (hi.values(0, j) - lo.values(0, j)) / (2 * h);
        scale = std::max(scale, std::abs(f));
        err = std::max(err, std::abs(d.values(1, j) - f));
      }
      fd = std::max(fd, err / std::max(scale, 1.0));
    }
    // Geometry invariance of a random NURBS curve under insertion and uniform refinement.
    std::vector<double> coefs(2 * kv.basisCount()), w(kv.basisCount());
    for (auto& x : coefs)
      x = nd(rng);
    for (auto& x : w)
      x = 0.5 + u(rng);
    const TensorPatch curve({kv}, 2, coefs, w);
    TensorPatch fine = curve.uniformRefine(1);
    for (int k = 0; k < 3; ++k) {
      const double t = u(rng);
      if (fine.knots(0).multiplicity(t) < p)
        fine = fine.insertKnot(0, t);
    }
    for (int s = 0; s <= 100; ++s) {
      const double t[1] = {s / 100.0};
      refine = std::max(refine, (curve.eval(t) - fine.eval(t)).norm() / (1.0 + curve.eval(t).norm()));
    }
  }
  return {pou <= 1e-12 && fd <= 1e-6 && refine <= 1e-12,
          fmt("partition of unity %.2e, derivative vs finite difference %.2e (rel), refinement drift %.2e", pou, fd,
              refine)};
}

Outcome arcs() {
  double worst = 0.0;
  const double cases[][4] = {{0.0, 2 * M_PI, 40.0, 0.0}, {0.0, 2 * M_PI, 45.0, 80.0}, {0.2, 1.4, 46.0, 0.0},
                             {-2.5, 0.7, 51.0, 80.0}, {1.0, 1.0 + 1.5 * M_PI, 7.5, 3.0}};
  for (const auto& c : cases) {
    const Eigen::Vector2d center(c[3], 0.0);
    const auto arc = circularArc(center, c[2], c[0], c[1]);
    for (int i = 0; i < 1000; ++i) {
      const double t[1] = {i / 999.0};
      worst = std::max(worst, std::abs((arc.eval(t) - center).norm() - c[2]));
    }
  }
  // Casing bores built from the same arcs.
  const auto casing = buildCasing(46.044, 45.044, 80.0, 6.0);
  for (const auto& s : casing.boundary("casingInner")) {
    const auto side = casing.patches[s.patch].sidePatch(s.side);
    for (int i = 0; i < 1000; ++i) {
      const double t[1] = {i / 999.0};
      const Eigen::Vector2d x = side.eval(t);
      worst = std::max(worst, std::min(std::abs(x.norm() - 46.044),
                                       std::abs((x - Eigen::Vector2d(80, 0)).norm() - 45.044)));
    }
  }
  return {worst <= 1e-12, fmt("max radius deviation %.2e mm over 1000 samples per arc", worst)};
}

Outcome patchTest() {
  double worst = 0.0;
  std::string d;
  for (int dim : {2, 3})
    for (int p : {2, 3}) {
      const double e = scenario::patchTestError(dim, p);
      worst = std::max(worst, e);
      d += fmt("%gD p=%g: %.2e  ", dim, p, e);
    }
  return {worst <= 1e-10, d + "(distorted two-patch models)"};
}

Outcome convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = scenario::manufacturedConvergence(3, 4);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string d = "L2 rates";
  for (double x : r.rates)
    d += fmt(" %.3f", x);
  d += fmt(", runtime %.1f s", secs);
  return {r.rates.size() == 4 && r.rates.back() >= 3.8 && secs < 60.0, d};
}

Outcome thermoelastic() {
  const auto r = scenario::heatedBar(12e-6, 100.0, 100.0);
  const double err = std::abs(r.elongationUm - 120.0);
  return {err <= 1e-3 && r.maxStress <= 1e-6 * r.youngs,
          fmt("tip elongation %.9f um (error %.1e um), max total stress %.2e N/mm^2 (limit %.2e)", r.elongationUm, err,
              r.maxStress, 1e-6 * r.youngs)};
}

Outcome fitting() {
  const auto cloud = syntheticMaleCloud();
  FitOptions fo;
  fo.tolerance = 4.4e-3;
  fo.maxControlPoints = 200;
  const auto r = fitCurve(cloud, fo);
  const double brute = oracle::maxDistance(r.curve, cloud.points);
  const double gap = std::abs(brute - r.report.maxDeviation);
  return {r.report.controlPointCount <= 120 && r.report.maxDeviation <= fo.tolerance && gap <= 1e-6,
          fmt("%g points, %g control points, maxDeviation %.4f um, brute force %.4f um", cloud.points.size(),
              r.report.controlPointCount, r.report.maxDeviation * 1e3, brute * 1e3)};
}

json runAll(const fs::path& out) {
  RunOptions o;
  o.outDir = out.string();
  const auto r = runPipeline("all", std::string(SCREWIGA_DATA_DIR) + "/compressor.json", o);
  if (r.exitCode != 0)
    std::fprintf(stderr, "compressor run failed: %s\n", r.message.c_str());
  return r.manifest;
}

Outcome paperScale(const json& m) {
  if (m.value("status", "") != "ok")
    return {false, "pipeline failed"};
  const auto& s = m["results"]["solve"];
  const double male = s["male"]["radial_max_um"], female = s["female"]["radial_max_um"];
  const double casing = s["casing"]["inward_max_um"];
  const double clearance = m["config"]["geometry"]["clearance_um"];
  const bool ok = male > clearance && casing > 0.0 && male > female;
  std::string d = fmt("radial male %.1f um, female %.1f um, casing inward %.1f um, clearance %.0f um", male, female,
                      casing, clearance);
  d += fmt("; elongation male %.1f um (total %.1f um)", s["male"]["body_elongation_max_um"].get<double>(),
           s["male"]["total_elongation_max_um"].get<double>());
  for (const auto& c : m["results"]["clearance"])
    d += "; " + c["pair"].get<std::string>() +
         fmt(" %.1f -> %.1f um", c["min_gap_before_um"].get<double>(), c["min_gap_after_um"].get<double>());
  return {ok, d};
}

Outcome clearanceAnalytics() {
  const auto r = scenario::concentricClearance(46.0, 44.0, 92.0, 12.0);
  ClearanceProfile before, after;
  before.stations = after.stations = {0.0};
  before.gaps = {0.100};
  after.gaps = {0.040};
  const double pct = contractionPercent(before, after).percent[0];
  return {std::abs(r.beforeUm - 44.0) <= 1e-6 && std::abs(r.afterUm + 60.0) <= 1e-6 && std::abs(pct - 60.0) <= 1e-9,
          fmt("concentric gap %.6f -> %.6f um, contraction 100 -> 40 um = %.6f %%", r.beforeUm, r.afterUm, pct)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const fs::path& a, const fs::path& b, const json& ma, const json& mb) {
  if (ma.value("status", "") != "ok" || mb.value("status", "") != "ok")
    return {false, "pipeline failed"};
  int geo = 0, same = 0;
  double coef = 0.0;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename();
    const auto ext = name.extension();
    if (ext == ".geo") {
      ++geo;
      same += slurp(e.path()) == slurp(b / name) ? 1 : 0;
    } else if (ext == ".disp") {
      auto model = std::make_shared<const MultiPatchModel>(loadGeometry((a / name).replace_extension(".geo").string()));
      const auto fa = loadField(model, e.path().string()), fb = loadField(model, (b / name).string());
      coef = std::max(coef, (fa.full - fb.full).cwiseAbs().maxCoeff());
    }
  }
  return {geo > 0 && same == geo && coef <= 1e-12,
          fmt("%g of %g geometry artifacts byte-identical, max coefficient difference %.1e", same, geo, coef)};
}

} // namespace

int main() {
  const fs::path work = fs::path(SCREWIGA_OUT_DIR) / "acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  int failed = 0;
  auto report = [&](int k, const char* title, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", k, title, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  };

  report(1, "spline kernel", splineKernel);
  report(2, "arcs and circles", arcs);
  report(3, "patch test", patchTest);
  report(4, "manufactured convergence", convergence);
  report(5, "analytic thermoelasticity", thermoelastic);
  report(6, "profile fitting", fitting);
  json first, second;
  report(7, "compressor reproduction", [&] {
    first = runAll(work / "run1");
    return paperScale(first);
  });
  report(8, "clearance analytics", clearanceAnalytics);
  report(9, "determinism", [&] {
    second = runAll(work / "run2");
    return determinism(work / "run1", work / "run2", first, second);
  });
  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
