#include "affectmod/errors.h"
#include "affectmod/lma_features.h"
#include "affectmod/synthetic.h"
#include "oracles.h"

#include <Eigen/Geometry>
#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace affectmod;

namespace {

const std::vector<BodyRole> kOne = {BodyRole::RightHand};

Eigen::MatrixX3d circle(double radius, int samples) {
  Eigen::MatrixX3d c(samples, 3);
  for (int i = 0; i < samples; ++i) {
    const double t = 2.0 * std::numbers::pi * i / 100.0;
    c.row(i) << radius * std::cos(t), radius * std::sin(t), 0.0;
  }
  return c;
}

Movement staticMovement(const Eigen::MatrixXd& pose, int frames) {
  Movement m;
  m.frames = pose.replicate(frames, 1);
  m.sourceId = "static";
  return m;
}

} // namespace

TEST_SUITE("lma_features") {

TEST_CASE("component names") {
  const auto& names = lmaComponentNames();
  REQUIRE(names.size() == 27);
  CHECK(names.front() == "WeightAll");
  CHECK(names[7] == "TimeAll");
  CHECK(names[14] == "FlowAll");
  CHECK(names[10] == "TimeRHand");
  CHECK(names.back() == "ShapeDirLHand");
  CHECK(lmaComponentIndex("ShapeHor") == 23);
  CHECK(lmaComponentIndex("nope") == -1);
}

TEST_CASE("weight effort by hand") {
  const auto ms = oracle::singleMarkerSet();
  const auto opt = FeatureOptions::unfiltered();
  CHECK(weightEffort(oracle::lineMovement({0, 1, 3}), ms, kOne, opt) == 4.0);
  CHECK(weightEffort(oracle::lineMovement({2, 2, 2}), ms, kOne, opt) == 0.0);
  auto shifted = oracle::lineMovement({0, 1, 3});
  shifted.frames.array() += 5.0;
  CHECK(weightEffort(shifted, ms, kOne, opt) == 4.0);
  auto heavy = ms;
  heavy.massCoefficients["m0"] = 2.5;
  CHECK(weightEffort(oracle::lineMovement({0, 1, 3}), heavy, kOne, opt) == 10.0);
  CHECK_THROWS_AS((void)weightEffort(oracle::lineMovement({0, 1, 3}), ms, {}, opt), InvalidArgument);
}

TEST_CASE("time effort by hand") {
  const auto ms = oracle::singleMarkerSet();
  const auto opt = FeatureOptions::unfiltered();
  CHECK(timeEffort(oracle::lineMovement({0, 1, 3, 6}), ms, kOne, opt) == 1.0);
  CHECK(timeEffort(oracle::lineMovement({0, 1, 4}), ms, kOne, opt) == 2.0);
  CHECK(timeEffort(oracle::lineMovement({0, 2, 4, 6, 8}), ms, kOne, opt) == 0.0);
  CHECK_THROWS_AS((void)timeEffort(oracle::lineMovement({0, 1}), ms, kOne, opt), InvalidArgument);
}

TEST_CASE("flow effort by hand") {
  const auto ms = oracle::singleMarkerSet();
  const auto opt = FeatureOptions::unfiltered();
  // v = (1, 2, 5), a = (1, 3)
  CHECK(flowEffort(oracle::lineMovement({0, 1, 3, 8}), ms, kOne, opt) == 2.0);
  CHECK(flowEffort(oracle::lineMovement({0, 2, 6, 16}), ms, kOne, opt) == 4.0);
  std::vector<double> quad;
  for (int t = 0; t < 200; ++t) {
    quad.push_back(0.5 * t * t);
  }
  CHECK(flowEffort(oracle::lineMovement(quad), ms, kOne, opt) <= 1e-9);
  CHECK_THROWS_AS((void)flowEffort(oracle::lineMovement({0, 1, 3}), ms, kOne, opt), InvalidArgument);
}

TEST_CASE("shaping values") {
  MarkerSet ms = oracle::sharedMarkerSet(4);
  Eigen::MatrixXd square(1, 12);
  square << 0, 0, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1;
  auto m = staticMovement(square, 5);
  const auto still = shapeShaping(m, ms);
  CHECK(still.vertical == 0.0);
  CHECK(still.sagittal == 0.0);
  CHECK(still.horizontal == doctest::Approx(1.0).epsilon(1e-15));

  // Torso centroid rises from z = 1.0 to a peak of 1.4 and comes back.
  const double zs[5] = {1.0, 1.2, 1.4, 1.3, 1.1};
  for (int t = 0; t < 5; ++t) {
    for (int k = 0; k < 4; ++k) {
      m.frames(t, 3 * k + 2) = zs[t];
    }
  }
  CHECK(shapeShaping(m, ms).vertical == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("shape flow volumes") {
  MarkerSet ms = oracle::sharedMarkerSet(8);
  Eigen::MatrixXd cube(1, 24);
  int c = 0;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      for (int z = 0; z < 2; ++z) {
        cube(0, c++) = x;
        cube(0, c++) = y;
        cube(0, c++) = z;
      }
    }
  }
  auto m = staticMovement(cube, 4);
  CHECK(shapeFlow(m) == 1.0);
  CHECK(shapeFlow(m, ShapeFlowMode::ConvexHull) == doctest::Approx(1.0).epsilon(1e-12));
  m.frames.row(2) *= 2.0;
  CHECK(shapeFlow(m) == 8.0);
  CHECK(shapeFlow(staticMovement(Eigen::MatrixXd::Ones(1, 24), 4)) == 0.0);
}

TEST_CASE("directional curvature of circles and lines") {
  const auto none = FilterParams::disabled();
  for (double r : {0.5, 1.0, 2.0}) {
    const double k = shapeDirectional(circle(r, 101), 120.0, none);
    CHECK(std::abs(k - 1.0 / r) <= 0.02 / r);
  }
  const Eigen::Matrix3d tilt =
      (Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 0.5).normalized())).toRotationMatrix();
  const Eigen::MatrixX3d tilted = (circle(2.0, 101) * tilt.transpose()).rowwise() + Eigen::RowVector3d(3, -1, 2);
  CHECK(
      shapeDirectional(tilted, 120.0, none) ==
      doctest::Approx(shapeDirectional(circle(2.0, 101), 120.0, none)).epsilon(1e-9));

  Eigen::MatrixX3d straight(20, 3);
  for (int t = 0; t < 20; ++t) {
    straight.row(t) << t, 2 * t, 0.5 * t;
  }
  CHECK(shapeDirectional(straight, 120.0, none) <= 1e-6);
}

TEST_CASE("motionless movement has zero dynamic components") {
  const auto ms = syntheticMarkerSet();
  const auto suite = makeSyntheticSuite({.perClass = 1});
  const auto m = staticMovement(suite.movements[0].frames.row(0), 30);
  for (const auto& opt : {FeatureOptions{}, FeatureOptions::unfiltered()}) {
    const auto v = lmaVector(m, ms, opt);
    const auto& names = lmaComponentNames();
    for (size_t i = 0; i < kNumLmaComponents; ++i) {
      if (names[i] == "ShapeHor" || names[i] == "ShapeFlow") {
        continue;
      }
      CHECK_MESSAGE(v[i] == 0.0, names[i]);
    }
  }
}

TEST_CASE("translation invariance") {
  const auto suite = makeSyntheticSuite({.perClass = 2, .seed = 4});
  for (const auto& m : suite.movements) {
    Movement moved = m;
    for (Eigen::Index c = 0; c < moved.frames.cols(); ++c) {
      moved.frames.col(c).array() += (c % 3 == 0 ? 5.0 : (c % 3 == 1 ? -3.0 : 2.0));
    }
    for (const auto& opt : {FeatureOptions{}, FeatureOptions::unfiltered()}) {
      const auto a = lmaVector(m, suite.markerSet, opt);
      const auto b = lmaVector(moved, suite.markerSet, opt);
      for (size_t i = 0; i < kNumLmaComponents; ++i) {
        CHECK(std::abs(a[i] - b[i]) <= 1e-9 * std::max(1.0, std::abs(a[i])));
      }
    }
  }
}

TEST_CASE("scaling laws with filters disabled") {
  const auto suite = makeSyntheticSuite({.perClass = 2, .seed = 6});
  const auto& names = lmaComponentNames();
  const double s = 2.0;
  for (const auto& m : suite.movements) {
    Movement big = m;
    big.frames *= s;
    const auto a = lmaVector(m, suite.markerSet, FeatureOptions::unfiltered());
    const auto b = lmaVector(big, suite.markerSet, FeatureOptions::unfiltered());
    for (size_t i = 0; i < kNumLmaComponents; ++i) {
      double factor = s;
      if (names[i].rfind("Weight", 0) == 0 || names[i] == "ShapeHor") {
        factor = s * s;
      } else if (names[i] == "ShapeFlow") {
        factor = s * s * s;
      } else if (names[i].rfind("ShapeDir", 0) == 0) {
        factor = 1.0 / s;
      }
      CHECK_MESSAGE(std::abs(b[i] - factor * a[i]) <= 1e-6 * std::abs(factor * a[i]) + 1e-300, names[i]);
    }
  }
}

TEST_CASE("weight is invariant under time reversal") {
  const auto suite = makeSyntheticSuite({.perClass = 1, .seed = 2});
  for (const auto& m : suite.movements) {
    Movement rev = m;
    rev.frames = m.frames.colwise().reverse();
    for (const auto& part : kAllRoles) {
      CHECK(
          weightEffort(m, suite.markerSet, {part}, FeatureOptions::unfiltered()) ==
          weightEffort(rev, suite.markerSet, {part}, FeatureOptions::unfiltered()));
    }
  }
}

TEST_CASE("lma vector is deterministic and orders the synthetic contrast") {
  const auto suite = makeSyntheticSuite({.perClass = 5, .seed = 1});
  const auto& ms = suite.markerSet;
  CHECK(lmaVector(suite.movements[0], ms) == lmaVector(suite.movements[0], ms));
  double fastTime = 0, slowTime = 0, fastFlow = 0, slowFlow = 0;
  for (const auto& m : suite.movements) {
    const auto v = lmaVector(normalizeScale(m, ms), ms);
    if (*m.label == "fear") {
      fastTime += v.get("TimeAll");
      fastFlow += v.get("FlowRHand");
    } else if (*m.label == "sad") {
      slowTime += v.get("TimeAll");
      slowFlow += v.get("FlowRHand");
    }
  }
  CHECK(fastTime > slowTime);
  CHECK(fastFlow > slowFlow);
}

TEST_CASE("feature CSV round trip and missing column") {
  const auto suite = makeSyntheticSuite({.perClass = 1, .seed = 2});
  const auto x = lmaMatrix(suite.movements, suite.markerSet);
  std::vector<std::string> ids;
  for (const auto& m : suite.movements) {
    ids.push_back(m.sourceId);
  }
  const auto text = featureCsv(ids, suite.labels(), x);
  const auto table = parseFeatureCsv(text);
  CHECK(table.features == x);
  CHECK(table.sourceIds == ids);
  CHECK(table.labels == suite.labels());

  std::string broken = text;
  const auto pos = broken.find(",FlowHead");
  broken.replace(pos, 9, ",FlowHeadX");
  try {
    (void)parseFeatureCsv(broken);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("FlowHead") != std::string::npos);
  }
}

} // TEST_SUITE
