#include <gtest/gtest.h>

#include <sstream>

#include "scenarios.hpp"
#include "screwiga/error.hpp"
#include "screwiga/serialize.hpp"

using namespace screwiga;

TEST(Geometry, WriteReadIsExact) {
  LoftOptions lo;
  lo.length = 20.0;
  lo.pitchDegrees = 33.3;
  lo.layers = 4;
  lo.shaftLength = 3.0;
  auto rotor = loftTwisted(*scenario::disk(7.1, Eigen::Vector2d(0.1, -0.2)), lo);
  rotor.name = "rotor";
  const std::string text = geometryToString(rotor);
  std::istringstream in(text);
  const auto back = readGeometry(in);
  EXPECT_EQ(geometryToString(back), text);
  ASSERT_EQ(back.patches.size(), rotor.patches.size());
  for (std::size_t p = 0; p < rotor.patches.size(); ++p) {
    EXPECT_EQ(back.patches[p].coefs(), rotor.patches[p].coefs());
    EXPECT_EQ(back.patches[p].weights(), rotor.patches[p].weights());
  }
  EXPECT_EQ(back.boundaries, rotor.boundaries);
  EXPECT_EQ(back.degenerateSides, rotor.degenerateSides);
}

TEST(Geometry, MissingFileNamesThePath) {
  try {
    loadGeometry("/nonexistent/dir/male.geo");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Geometry);
    EXPECT_NE(std::string(e.what()).find("male.geo"), std::string::npos);
  }
}

TEST(Geometry, TruncatedInputIsRejected) {
  const std::string text = geometryToString(buildBox(Eigen::Vector2d(1, 1)));
  std::istringstream in(text.substr(0, text.size() / 2));
  EXPECT_THROW(readGeometry(in), Error);
  std::istringstream junk("not-a-geometry 1");
  EXPECT_THROW(readGeometry(junk), Error);
}

TEST(PointCloud, DirectivesAndComments) {
  std::istringstream in("# profile\ncorners 0 2\n0 0\n1 0  # tip\n1 1\nclosed 1\n0 1\n");
  const auto c = readPointCloud(in);
  EXPECT_EQ(c.points.size(), 4u);
  EXPECT_TRUE(c.closed);
  EXPECT_EQ(c.corners, (std::vector<int>{0, 2}));
  EXPECT_EQ(c.points[1], Eigen::Vector2d(1, 0));
  std::istringstream colon("corners: 1\n0 0\n1 0\n");
  EXPECT_EQ(readPointCloud(colon).corners, (std::vector<int>{1}));
  std::istringstream bad("0 0\n1 x\n");
  EXPECT_THROW(readPointCloud(bad), Error);
}

TEST(PointCloud, SaveLoadRoundTrip) {
  const auto dir = scenario::scratchDir("cloud");
  PointCloud2D c;
  c.points = {{0.1, 0.2}, {1.0 / 3.0, -2.5}, {3.0, 1e-7}};
  c.corners = {1};
  savePointCloud(c, (dir / "c.txt").string());
  const auto back = loadPointCloud((dir / "c.txt").string());
  EXPECT_EQ(back.points, c.points);
  EXPECT_EQ(back.corners, c.corners);
}

TEST(Field, SaveLoadKeepsValues) {
  const auto dir = scenario::scratchDir("field");
  auto rotor = scenario::disk(5.0);
  const auto u = scenario::homogeneousStrain(rotor, 2e-3);
  saveField(u, (dir / "u.disp").string());
  const auto back = loadField(rotor, (dir / "u.disp").string());
  for (int p = 0; p < 2; ++p) {
    const double prm[2] = {0.7, 0.3};
    EXPECT_EQ(back.value(p, prm), u.value(p, prm));
  }
  // Coefficients that do not fit the model are rejected.
  auto box = std::make_shared<MultiPatchModel>(buildBox(Eigen::Vector2d(1, 1)));
  EXPECT_THROW(loadField(box, (dir / "u.disp").string()), Error);
}

TEST(Digest, StableAndContentSensitive) {
  const auto dir = scenario::scratchDir("digest");
  scenario::writeText(dir / "a", "hello");
  scenario::writeText(dir / "b", "hello");
  scenario::writeText(dir / "c", "hellp");
  EXPECT_EQ(fileDigest((dir / "a").string()), fileDigest((dir / "b").string()));
  EXPECT_NE(fileDigest((dir / "a").string()), fileDigest((dir / "c").string()));
  EXPECT_EQ(fileDigest((dir / "a").string()).size(), 16u);
  // FNV-1a 64 of the empty input is the offset basis.
  scenario::writeText(dir / "e", "");
  EXPECT_EQ(fileDigest((dir / "e").string()), "cbf29ce484222325");
}
