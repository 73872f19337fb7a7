#include <gtest/gtest.h>

#include "scenarios.hpp"
#include "screwiga/error.hpp"
#include "screwiga/material.hpp"
#include "screwiga/thermoelastic.hpp"

using namespace screwiga;

TEST(Material, LameFromEngineeringConstants) {
  const auto m = materialFromEngineering(209000.0, 0.3, 12e-6, 70.0);
  EXPECT_NEAR(m.mu, 209000.0 / 2.6, 1e-9);
  EXPECT_NEAR(m.lambda, 209000.0 * 0.3 / (1.3 * 0.4), 1e-9);
  EXPECT_THROW(materialFromEngineering(209000.0, 0.7, 12e-6, 70.0), Error);
  EXPECT_THROW(materialFromEngineering(-1.0, 0.3, 12e-6, 70.0), Error);
  Material bad = m;
  bad.alpha = -1e-6;
  EXPECT_THROW(validateMaterial(bad), Error);
}

TEST(Material, FreeThermalStrainGivesZeroStress) {
  const auto m = materialFromEngineering(200000.0, 0.25, 1e-5, 20.0);
  const auto eps = thermalStrain(m, 120.0, 3);
  EXPECT_NEAR(eps(0, 0), 1e-3, 1e-18);
  EXPECT_EQ(eps(0, 1), 0.0);
  const Eigen::Matrix3d s = stress(m, Eigen::Matrix3d::Identity() * 1e-3);
  EXPECT_NEAR(s(0, 0), (2 * m.mu + 3 * m.lambda) * 1e-3, 1e-9);
  Eigen::Matrix2d skew;
  skew << 0, 1, -1, 0;
  EXPECT_THROW(stress(m, skew), Error);
}

TEST(Bar, UniformHeatingElongatesByAlphaDeltaTL) {
  const auto r = scenario::heatedBar(12e-6, 100.0, 100.0);
  EXPECT_NEAR(r.elongationUm, 120.0, 1e-3);
  EXPECT_LE(r.maxStress, 1e-6 * r.youngs);
}

TEST(Bar, ElongationScalesLinearly) {
  const auto a = scenario::heatedBar(12e-6, 50.0, 100.0, 1);
  const auto b = scenario::heatedBar(12e-6, 100.0, 200.0, 3);
  EXPECT_NEAR(a.elongationUm, 60.0, 1e-3);
  EXPECT_NEAR(b.elongationUm, 240.0, 1e-3);
}

TEST(Temperature, FieldsEvaluateAsDescribed) {
  const auto lin = TemperatureField::linearAxial(0.0, 100.0, 70.0, 200.0);
  const double prm[3] = {0.0, 0.0, 0.0};
  EXPECT_NEAR(lin(0, prm, Eigen::Vector3d(0, 0, 50.0)), 135.0, 1e-12);
  EXPECT_NEAR(lin(0, prm, Eigen::Vector3d(0, 0, -5.0)), 70.0, 1e-12);
  EXPECT_NEAR(lin(0, prm, Eigen::Vector3d(0, 0, 130.0)), 200.0, 1e-12);
  const auto blend = TemperatureField::throughThickness(TemperatureField::uniform(100.0), TemperatureField::uniform(0.0));
  const double mid[2] = {0.25, 0.5};
  EXPECT_NEAR(blend(0, mid, Eigen::Vector2d::Zero()), 75.0, 1e-12);
  EXPECT_THROW(TemperatureField::linearAxial(1.0, 1.0, 0.0, 1.0), Error);
  EXPECT_THROW(TemperatureField()(0, prm, Eigen::Vector3d::Zero()), Error);
}

TEST(Constraints, RigidMotionIsRejected) {
  auto model = std::make_shared<MultiPatchModel>(buildBox(Eigen::Vector3d(10, 10, 100), 1));
  const Material mat = materialFromEngineering(209000.0, 0.3, 12e-6, 20.0);
  BoundaryConditionSet bcs;
  bcs.roller = {"zLow"};   // in-plane translation and rotation remain free
  EXPECT_THROW(solveThermoelastic(model, mat, TemperatureField::uniform(120.0), bcs), Error);
}

TEST(Constraints, ConflictingConditionsAreRejected) {
  auto model = std::make_shared<MultiPatchModel>(buildBox(Eigen::Vector3d(1, 1, 1), 1));
  BoundaryConditionSet twice;
  twice.fixed = {"zLow"};
  twice.roller = {"zLow"};
  EXPECT_THROW(twice.validate(*model), Error);
  BoundaryConditionSet traction;
  traction.fixed = {"zLow"};
  traction.tractions.push_back({"zLow", Eigen::Vector3d(0, 0, 1)});
  EXPECT_THROW(traction.validate(*model), Error);
  BoundaryConditionSet unknown;
  unknown.fixed = {"nowhere"};
  EXPECT_THROW(unknown.validate(*model), Error);
}

TEST(Problem, ReferenceTemperatureOverride) {
  auto model = std::make_shared<MultiPatchModel>(buildBox(Eigen::Vector3d(10, 10, 100), 2, {1, 1, 2}));
  const Material mat = materialFromEngineering(209000.0, 0.3, 12e-6, 70.0);
  BoundaryConditionSet bcs;
  bcs.roller = {"zLow"};
  bcs.pins.push_back({Eigen::Vector3d(0, 0, 0), {true, true, false}});
  bcs.pins.push_back({Eigen::Vector3d(10, 0, 0), {false, true, false}});
  const ThermoelasticProblem problem(model, mat, bcs);
  const auto T = TemperatureField::uniform(170.0);
  EXPECT_NEAR(axialElongation(problem.solve(T), "zHigh").maxUm, 120.0, 1e-3);
  EXPECT_NEAR(axialElongation(problem.solve(T, nullptr, 20.0), "zHigh").maxUm, 180.0, 1e-3);
}

TEST(Problem, SlabUnderTractionMatchesHooke) {
  auto model = std::make_shared<MultiPatchModel>(buildBox(Eigen::Vector3d(10, 10, 100), 2, {1, 1, 2}));
  const Material mat = materialFromEngineering(200000.0, 0.3, 0.0, 20.0);
  BoundaryConditionSet bcs;
  bcs.roller = {"zLow"};
  bcs.pins.push_back({Eigen::Vector3d(0, 0, 0), {true, true, false}});
  bcs.pins.push_back({Eigen::Vector3d(10, 0, 0), {false, true, false}});
  bcs.tractions.push_back({"zHigh", Eigen::Vector3d(0, 0, 100.0)});
  const auto u = solveThermoelastic(model, mat, TemperatureField::uniform(20.0), bcs);
  // sigma / E * L = 100 / 200000 * 100 mm = 50 um
  EXPECT_NEAR(axialElongation(u, "zHigh").maxUm, 50.0, 1e-6);
}

TEST(SteadyTemperature, LinearProfileBetweenFaces) {
  auto model = std::make_shared<MultiPatchModel>(buildBox(Eigen::Vector3d(1, 1, 2), 2, {1, 1, 2}));
  const auto f = solveSteadyTemperature(
      model, {{"zLow", TemperatureField::uniform(10.0)}, {"zHigh", TemperatureField::uniform(50.0)}});
  const double prm[3] = {0.3, 0.7, 0.25};
  EXPECT_NEAR(f.value(0, prm)[0], 20.0, 1e-10);
}
