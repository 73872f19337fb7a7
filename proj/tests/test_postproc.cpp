#include <gtest/gtest.h>

#include <sstream>

#include "scenarios.hpp"
#include "screwiga/error.hpp"
#include "screwiga/postproc.hpp"

using namespace screwiga;

namespace {

struct VtkGrid {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::vector<int>> cells;
  std::vector<int> types;
  std::vector<Eigen::Vector3d> displacement;
  std::vector<double> temperature;
};

VtkGrid readVtk(const std::string& path) {
  std::ifstream in(path);
  VtkGrid g;
  std::string tok;
  while (in >> tok) {
    if (tok == "POINTS") {
      std::size_t n;
      in >> n >> tok;
      g.points.resize(n);
      for (auto& p : g.points)
        in >> p[0] >> p[1] >> p[2];
    } else if (tok == "CELLS") {
      std::size_t n, total;
      in >> n >> total;
      g.cells.resize(n);
      for (auto& c : g.cells) {
        int k;
        in >> k;
        c.resize(k);
        for (int& i : c)
          in >> i;
      }
    } else if (tok == "CELL_TYPES") {
      std::size_t n;
      in >> n;
      g.types.resize(n);
      for (int& t : g.types)
        in >> t;
    } else if (tok == "VECTORS") {
      in >> tok >> tok;
      g.displacement.resize(g.points.size());
      for (auto& v : g.displacement)
        in >> v[0] >> v[1] >> v[2];
    } else if (tok == "SCALARS") {
      std::string name;
      in >> name >> tok >> tok >> tok >> tok;   // type, components, LOOKUP_TABLE default
      std::vector<double> vals(g.points.size());
      for (double& v : vals)
        in >> v;
      if (name == "temperature")
        g.temperature = vals;
    }
  }
  return g;
}

} // namespace

TEST(Clearance, ConcentricCirclesCloseByGrowthPlusCasing) {
  const auto r = scenario::concentricClearance(47.0, 44.0, 92.0, 12.0);
  EXPECT_NEAR(r.beforeUm, 44.0, 1e-6);
  EXPECT_NEAR(r.afterUm, -60.0, 1e-6);
}

TEST(Clearance, SymmetricBetweenSeparatedSmoothCurves) {
  auto a = scenario::disk(20.0, Eigen::Vector2d(0, 0));
  auto b = scenario::disk(15.0, Eigen::Vector2d(35.7, 4.0));
  const BoundarySampler sa(a, "boundary"), sb(b, "boundary");
  const double ab = clearanceProfile(sa, sb).minGap(), ba = clearanceProfile(sb, sa).minGap();
  const double exact = std::hypot(35.7, 4.0) - 35.0;
  EXPECT_NEAR(std::abs(ab), std::abs(ba), 1e-6);
  EXPECT_NEAR(ab, exact, 1e-6);
}

TEST(Clearance, TranslationTowardsLowersGapByShift) {
  auto a = scenario::disk(20.0);
  auto b = scenario::disk(15.0, Eigen::Vector2d(36.0, 0.0));
  const BoundarySampler sb(b, "boundary");
  const double g0 = clearanceProfile(BoundarySampler(a, "boundary"), sb).minGap();
  for (double delta : {0.1, 0.4, 0.0123}) {
    auto moved = std::make_shared<MultiPatchModel>(a->translated(Eigen::Vector2d(delta, 0.0)));
    const double g1 = clearanceProfile(BoundarySampler(moved, "boundary"), sb).minGap();
    EXPECT_NEAR(g0 - g1, delta, 1e-8);
  }
}

TEST(Clearance, InsideCasingIsPositiveAndOverlapNegative) {
  auto rotor = scenario::disk(10.0);
  auto casing = std::make_shared<MultiPatchModel>(buildCasing(10.5, 10.5, 0.0, 2.0));
  const BoundarySampler r(rotor, "boundary"), c(casing, "casingInner");
  EXPECT_NEAR(clearanceProfile(r, c).minGap(), 0.5, 1e-9);
  auto big = scenario::disk(11.0);
  EXPECT_NEAR(clearanceProfile(BoundarySampler(big, "boundary"), c).minGap(), -0.5, 1e-9);
}

TEST(Sampler, ZeroScaleReproducesGeometry) {
  auto rotor = scenario::disk(10.0, Eigen::Vector2d(1, 2));
  const auto u = scenario::homogeneousStrain(rotor, 0.01, Eigen::Vector2d(1, 2));
  const BoundarySampler s(rotor, "boundary", u, 0.0, std::nullopt, 64);
  for (const auto& smp : s.samples()) {
    EXPECT_EQ(smp.x, s.referencePoint(smp.piece, smp.t));
    EXPECT_EQ(s.point(smp.piece, smp.t), s.referencePoint(smp.piece, smp.t));
  }
  const BoundarySampler grown(rotor, "boundary", u, 1.0, std::nullopt, 64);
  EXPECT_NEAR((grown.point(0, 0.3) - Eigen::Vector2d(1, 2)).norm(), 10.0 * 1.01, 1e-12);
}

TEST(Sampler, ThreeDimensionalStationCut) {
  LoftOptions lo;
  lo.length = 30.0;
  lo.pitchDegrees = 90.0;
  lo.layers = 12;
  lo.shaftLength = 5.0;
  auto rotor = std::make_shared<MultiPatchModel>(loftTwisted(*scenario::disk(8.0), lo));
  const BoundarySampler s(rotor, "lateral", std::nullopt, 1.0, 12.0, 128);
  for (const auto& smp : s.samples())
    EXPECT_NEAR(smp.x.norm(), 8.0, 2e-4);
  EXPECT_THROW(BoundarySampler(rotor, "lateral", std::nullopt, 1.0, 99.0, 128), Error);
  EXPECT_THROW(BoundarySampler(rotor, "lateral"), Error);
}

TEST(Contraction, PercentOfClearanceLost) {
  ClearanceProfile before, after;
  before.stations = {0.0, 1.0, 2.0};
  after.stations = before.stations;
  before.gaps = {0.1, 0.05, -0.01};
  after.gaps = {0.04, 0.06, -0.02};
  const auto c = contractionPercent(before, after);
  EXPECT_NEAR(c.percent[0], 60.0, 1e-12);
  EXPECT_NEAR(c.percent[1], -20.0, 1e-12);
  EXPECT_TRUE(c.flagged[2]);
  EXPECT_TRUE(std::isnan(c.percent[2]));
  after.stations = {0.0, 1.0};
  after.gaps = {0.0, 0.0};
  EXPECT_THROW(contractionPercent(before, after), Error);
}

TEST(Elongation, AxialFaceStatistics) {
  auto model = std::make_shared<MultiPatchModel>(buildBox(Eigen::Vector3d(2, 2, 10), 2));
  auto space = std::make_shared<DiscreteSpace>(model, 3);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(space->totalCount());
  const auto& p = model->patches[0];
  for (int i = 0; i < p.controlCount(); ++i)
    c[space->globalDof(space->scalarIndex(0, i), 2)] = 1e-3 * p.controlPoint(i)[2] * (1.0 + 0.1 * p.controlPoint(i)[0]);
  const DiscreteField u(space, space->restrict(c));
  const auto e = axialElongation(u, "zHigh");
  EXPECT_NEAR(e.maxUm, 12.0, 1e-9);
  EXPECT_NEAR(e.meanUm, 11.0, 1e-9);
}

TEST(Export, UnitCubeAtResolutionTwo) {
  const auto dir = scenario::scratchDir("vtk");
  const auto cube = buildBox(Eigen::Vector3d(1, 1, 1), 1);
  exportVtk(cube, {}, 2, (dir / "cube.vtk").string());
  const auto g = readVtk((dir / "cube.vtk").string());
  EXPECT_EQ(g.points.size(), 8u);
  ASSERT_EQ(g.cells.size(), 1u);
  EXPECT_EQ(g.cells[0].size(), 8u);
  EXPECT_EQ(g.types[0], 12);
}

TEST(Export, RoundTripOfPointsAndFields) {
  const auto dir = scenario::scratchDir("vtk_rt");
  auto rotor = scenario::disk(10.0);
  const auto u = scenario::homogeneousStrain(rotor, 1e-3);
  const auto T = TemperatureField::linearAxial(-10.0, 10.0, 20.0, 80.0, 0);
  const ExportField fields{&u, &T};
  exportVtk(*rotor, fields, 5, (dir / "rotor.vtk").string());
  const auto g = readVtk((dir / "rotor.vtk").string());
  ASSERT_EQ(g.points.size(), 2u * 25u);
  ASSERT_EQ(g.displacement.size(), g.points.size());
  ASSERT_EQ(g.temperature.size(), g.points.size());
  EXPECT_EQ(g.cells.size(), 2u * 16u);
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    EXPECT_NEAR((g.displacement[i].head<2>() - 1e-3 * g.points[i].head<2>()).norm(), 0.0, 1e-15);
    EXPECT_NEAR(g.temperature[i], 20.0 + 3.0 * (g.points[i][0] + 10.0), 1e-12);
  }
}

TEST(Export, ClearanceCsvHeader) {
  const auto dir = scenario::scratchDir("csv");
  ClearanceProfile p;
  p.stations = {0.0, 0.5};
  p.gaps = {0.044, 0.045};
  p.points = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  writeClearanceCsv(p, (dir / "c.csv").string());
  std::ifstream in(dir / "c.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "station_mm,gap_um");
  std::getline(in, line);
  EXPECT_NEAR(std::stod(line.substr(line.find(',') + 1)), 44.0, 1e-9);
}
