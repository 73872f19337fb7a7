#include <gtest/gtest.h>

#include "oracles.hpp"
#include "scenarios.hpp"
#include "screwiga/error.hpp"
#include "screwiga/geomgen.hpp"
#include "screwiga/pipeline.hpp"

using namespace screwiga;

TEST(Arc, FullCircleAndPartialArcsHoldRadius) {
  const Eigen::Vector2d c(80.0, -3.5);
  for (auto [a0, a1] : {std::pair{0.0, 2 * M_PI}, {0.3, 1.1}, {-2.0, 2.5}, {1.0, 1.0 + 1.9 * M_PI}}) {
    const auto arc = circularArc(c, 47.25, a0, a1);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double t[1] = {i / 999.0};
      worst = std::max(worst, std::abs((arc.eval(t) - c).norm() - 47.25));
    }
    EXPECT_LE(worst, 1e-12);
    const double t0[1] = {0.0}, t1[1] = {1.0};
    EXPECT_NEAR((arc.eval(t0) - c - 47.25 * Eigen::Vector2d(std::cos(a0), std::sin(a0))).norm(), 0.0, 1e-12);
    EXPECT_NEAR((arc.eval(t1) - c - 47.25 * Eigen::Vector2d(std::cos(a1), std::sin(a1))).norm(), 0.0, 1e-12);
  }
}

TEST(Arc, RejectsBadInput) {
  EXPECT_THROW(circularArc(Eigen::Vector2d::Zero(), -1.0, 0.0, 1.0), Error);
  EXPECT_THROW(circularArc(Eigen::Vector2d::Zero(), 1.0, 1.0, 0.5), Error);
}

TEST(Fit, CircleCloudWithinToleranceByBruteForce) {
  PointCloud2D cloud;
  cloud.points = oracle::circlePoints(30.0, 400);
  FitOptions fo;
  fo.tolerance = 1e-3;
  const auto r = fitCurve(cloud, fo);
  EXPECT_LE(r.report.maxDeviation, fo.tolerance);
  EXPECT_LE(r.report.controlPointCount, fo.maxControlPoints);
  EXPECT_NEAR(oracle::maxDistance(r.curve, cloud.points), r.report.maxDeviation, 1e-6);
  const double t0[1] = {0.0}, t1[1] = {1.0};
  EXPECT_NEAR((r.curve.eval(t0) - r.curve.eval(t1)).norm(), 0.0, 1e-12);
}

TEST(Fit, CornersAreInterpolated) {
  // Square with bulged edges; the corners must be hit exactly.
  PointCloud2D cloud;
  const int n = 50;
  const Eigen::Vector2d v[4] = {{0, 0}, {10, 0}, {10, 10}, {0, 10}};
  for (int e = 0; e < 4; ++e) {
    cloud.corners.push_back(static_cast<int>(cloud.points.size()));
    for (int i = 0; i < n; ++i) {
      const double s = static_cast<double>(i) / n;
      Eigen::Vector2d p = v[e] + s * (v[(e + 1) % 4] - v[e]);
      const Eigen::Vector2d d = (v[(e + 1) % 4] - v[e]).normalized();
      p += 0.2 * std::sin(M_PI * s) * Eigen::Vector2d(d.y(), -d.x());
      cloud.points.push_back(p);
    }
  }
  FitOptions fo;
  fo.tolerance = 2e-3;
  const auto r = fitCurve(cloud, fo);
  EXPECT_LE(r.report.maxDeviation, fo.tolerance);
  for (int k : cloud.corners)
    EXPECT_LE(oracle::distanceToCurve(r.curve, cloud.points[k], 4000), 1e-9);
}

TEST(Fit, ReportsUnreachableTolerance) {
  PointCloud2D cloud;
  cloud.points = oracle::circlePoints(30.0, 400);
  FitOptions fo;
  fo.tolerance = 1e-9;
  fo.maxControlPoints = 8;
  EXPECT_THROW(fitCurve(cloud, fo), Error);
}

TEST(Fit, RejectsDegenerateInput) {
  PointCloud2D cloud;
  cloud.points = {{0, 0}, {1, 0}};
  EXPECT_THROW(fitCurve(cloud, FitOptions{}), Error);
}

TEST(Fit, SyntheticMaleProfileMeetsBudget) {
  auto cloud = syntheticMaleCloud();
  EXPECT_EQ(cloud.points.size(), 2572u);
  EXPECT_EQ(cloud.corners.size(), 4u);
  FitOptions fo;
  fo.tolerance = 4.4e-3;
  const auto r = fitCurve(cloud, fo);
  EXPECT_LE(r.report.controlPointCount, 120);
  EXPECT_LE(r.report.maxDeviation, fo.tolerance);
}

TEST(ScaledBoundary, SectionIsValidAndConforming) {
  auto m = scenario::disk(20.0, Eigen::Vector2d(3.0, 1.0));
  ASSERT_EQ(m->patches.size(), 2u);
  const auto vr = validateModel(*m);
  EXPECT_TRUE(vr.ok());
  EXPECT_GE(vr.count(FindingKind::DeclaredSingularity), 1);
  // Outer boundary reproduces the circle.
  const auto& outer = m->patches[1];
  for (int i = 0; i <= 50; ++i) {
    const double p[2] = {1.0, i / 50.0};
    EXPECT_NEAR((outer.eval(p) - Eigen::Vector2d(3.0, 1.0)).norm(), 20.0, 1e-12);
  }
}

TEST(Casing, TwoBoresAreExactCircles) {
  const auto m = buildCasing(50.0, 40.0, 80.0, 6.0);
  EXPECT_TRUE(validateModel(m).ok());
  EXPECT_FALSE(m.boundary("casingInner").empty());
  EXPECT_FALSE(m.boundary("casingOuter").empty());
  int onMale = 0, onFemale = 0;
  for (const auto& s : m.boundary("casingInner")) {
    const auto side = m.patches[s.patch].sidePatch(s.side);
    for (int i = 0; i <= 200; ++i) {
      const double t[1] = {i / 200.0};
      const Eigen::Vector2d x = side.eval(t);
      const double dm = std::abs(x.norm() - 50.0), df = std::abs((x - Eigen::Vector2d(80, 0)).norm() - 40.0);
      EXPECT_LE(std::min(dm, df), 1e-12);
      (dm < df ? onMale : onFemale)++;
    }
  }
  EXPECT_GT(onMale, 0);
  EXPECT_GT(onFemale, 0);
}

TEST(Casing, SingleAnnulus) {
  const auto m = buildCasing(10.0, 10.0, 0.0, 2.0);
  EXPECT_TRUE(validateModel(m).ok());
  EXPECT_THROW(buildCasing(50.0, 40.0, 80.0, -1.0), Error);
}

TEST(Loft, TwistedRotorIsConformingAndValid) {
  const auto section = *scenario::disk(20.0);
  LoftOptions lo;
  lo.length = 50.0;
  lo.pitchDegrees = 120.0;
  lo.layers = 16;
  lo.shaftLength = 10.0;
  const auto rotor = loftTwisted(section, lo);
  EXPECT_EQ(rotor.patches.size(), 4u);
  EXPECT_EQ(rotor.parDim(), 3);
  EXPECT_TRUE(validateModel(rotor, 6).ok());
  for (const char* b : {"lateral", "lowPressureEnd", "highPressureEnd", "bodyHighPressureEnd"})
    EXPECT_FALSE(rotor.boundary(b).empty()) << b;
  // A circle stays a circle under twist: exactly on the end sections, up to the axial
  // interpolation error in between.
  const auto& outer = rotor.patches[0];
  for (double z : {0.0, 0.37, 1.0}) {
    const double p[3] = {1.0, 0.3, z};
    const auto x = outer.eval(p);
    EXPECT_NEAR(x.head<2>().norm(), 20.0, z == 0.37 ? 2e-4 : 1e-12);
  }
  EXPECT_THROW(loftTwisted(buildBox(Eigen::Vector2d(1, 1)), lo), Error);
}

TEST(Loft, RefinementKeepsInterfacesConforming) {
  const auto section = *scenario::disk(5.0);
  LoftOptions lo;
  lo.length = 20.0;
  lo.pitchDegrees = 45.0;
  lo.layers = 4;
  lo.shaftLength = 4.0;
  const auto rotor = loftTwisted(section, lo).refined(1);
  EXPECT_TRUE(validateModel(rotor, 4).ok());
}

TEST(Validation, DetectsInterfaceMismatchAndFoldedPatch) {
  auto m = *scenario::distortedPair(2, 2, 1, 0.0);
  EXPECT_TRUE(validateModel(m).ok());
  auto moved = m;
  auto c = moved.patches[1].coefs();
  c[0] += 0.1;   // corner on the shared side
  moved.patches[1] = moved.patches[1].withCoefs(c);
  EXPECT_GE(validateModel(moved).count(FindingKind::InterfaceMismatch), 1);

  auto folded = m;
  auto f = folded.patches[0].coefs();
  std::swap(f[0], f[2]);   // swap x of the first two control points
  folded.patches[0] = folded.patches[0].withCoefs(f);
  EXPECT_GE(validateModel(folded).count(FindingKind::NonPositiveJacobian), 1);
}

TEST(Model, TranslationMovesEveryControlPoint) {
  const auto m = buildBox(Eigen::Vector3d(1, 2, 3), 2, {2, 1, 1});
  const auto t = m.translated(Eigen::Vector3d(5, -1, 0.5));
  const double p[3] = {0.3, 0.6, 0.9};
  EXPECT_NEAR((t.patches[0].eval(p) - m.patches[0].eval(p) - Eigen::Vector3d(5, -1, 0.5)).norm(), 0.0, 1e-14);
  EXPECT_EQ(m.refined(1).elementCount(), 8 * m.elementCount());
}

TEST(MaxRadius, OfCircle) {
  const auto c = circularArc(Eigen::Vector2d(80, 0), 42.0, 0.0, 2 * M_PI);
  EXPECT_NEAR(maxRadius(c, Eigen::Vector2d(80, 0)), 42.0, 1e-10);
}
