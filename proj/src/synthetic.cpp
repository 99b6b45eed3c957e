#include "affectmod/synthetic.h"

#include "affectmod/errors.h"

#include <fmt/format.h>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace affectmod {

const std::vector<SyntheticStyle>& syntheticStyles() {
  static const std::vector<SyntheticStyle> styles = {
      {"anger", false, true, true},
      {"fear", true, true, false},
      {"happy", true, false, true},
      {"sad", false, false, false},
  };
  return styles;
}

MarkerSet syntheticMarkerSet() {
  MarkerSet ms;
  ms.markers = {
      "head", "chest", "pelvis", "right_shoulder", "right_wrist", "left_wrist", "right_ankle", "left_ankle"};
  ms.groups[BodyRole::Torso] = {"chest", "pelvis", "right_shoulder"};
  ms.groups[BodyRole::Head] = {"head"};
  ms.groups[BodyRole::RightHand] = {"right_wrist"};
  ms.groups[BodyRole::LeftHand] = {"left_wrist"};
  ms.groups[BodyRole::RightFoot] = {"right_ankle"};
  ms.groups[BodyRole::LeftFoot] = {"left_ankle"};
  return ms;
}

namespace {

using Eigen::Vector3d;

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

} // namespace

Movement synthesizeMovement(
    const SyntheticStyle& style,
    const MarkerSet& markerSet,
    double frameRate,
    double subjectScale,
    double noise,
    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double duration = (style.fast ? 1.7 : 1.9) * jitter(rng);
  const double amplitude = (style.fast ? 1.1 : 0.45) * jitter(rng);
  const double posture = (style.high ? 1.0 : -1.0) * jitter(rng);
  const double cycles = 1.5 * jitter(rng);
  const double shakeHz = 3.5 * jitter(rng);
  const double shakePhase = angle(rng);
  Vector3d shakeDir(gauss(rng), gauss(rng), gauss(rng));
  shakeDir.normalize();

  const auto frames = static_cast<Eigen::Index>(std::lround(duration * frameRate)) + 1;
  const Eigen::Index m = static_cast<Eigen::Index>(markerSet.size());
  Movement mv;
  mv.frameRate = frameRate;
  mv.label = style.label;
  mv.frames.resize(frames, 3 * m);

  // T-pose, x to the right, y forward, z up.
  const Vector3d head0(0.0, 0.0, 1.65);
  const Vector3d chest0(0.0, 0.0, 1.35);
  const Vector3d pelvis0(0.0, 0.0, 1.0);
  const Vector3d rShoulder0(0.2, 0.0, 1.45);
  const Vector3d rWrist0(0.8, 0.0, 1.45);
  const Vector3d lWrist0(-0.8, 0.0, 1.45);
  const Vector3d rAnkle0(0.15, 0.0, 0.05);
  const Vector3d lAnkle0(-0.15, 0.0, 0.05);

  // Posture: high lifts the chest and holds the arms up and forward, low
  // hunches the torso and lets the arms hang.
  const Vector3d lean = posture > 0 ? Vector3d(0.0, -0.02, 0.03) * posture : Vector3d(0.0, 0.12, -0.06) * -posture;
  const Vector3d headLean =
      posture > 0 ? Vector3d(0.0, -0.03, 0.04) * posture : Vector3d(0.0, 0.2, -0.1) * -posture;
  const double pelvisDrop = posture > 0 ? 0.01 * posture : -0.05 * -posture;
  const Vector3d rArmRest =
      posture > 0 ? Vector3d(-0.25, 0.25, 0.15) * posture : Vector3d(-0.45, 0.1, -0.6) * -posture;
  const Vector3d lArmRest(-rArmRest.x(), rArmRest.y(), rArmRest.z());

  for (Eigen::Index t = 0; t < frames; ++t) {
    const double u = static_cast<double>(t) / static_cast<double>(frames - 1);
    const double w = smoothstep(u / 0.2);
    const double v = std::clamp((u - 0.2) / 0.8, 0.0, 1.0);
    const double theta = 2.0 * std::numbers::pi * cycles * v;
    const double sway = amplitude * w * std::sin(theta);

    const Vector3d torsoShift = w * lean + Vector3d(0.0, 0.12 * sway, 0.0);
    const Vector3d head = head0 + w * headLean + Vector3d(0.0, 0.15 * sway, 0.0);
    const Vector3d chest = chest0 + torsoShift;
    const Vector3d pelvis = pelvis0 + Vector3d(0.0, 0.0, w * pelvisDrop);
    const Vector3d rShoulder = rShoulder0 + torsoShift;

    const Vector3d rLoop =
        amplitude * w * Vector3d(0.1 * (1.0 - std::cos(theta)), 0.35 * std::sin(theta), 0.2 * (1.0 - std::cos(theta)));
    const double lagged = theta - 0.5 * std::numbers::pi;
    const Vector3d lLoop =
        amplitude * w * Vector3d(-0.08 * (1.0 - std::cos(lagged)), 0.3 * std::sin(lagged), 0.15 * std::sin(2.0 * lagged));
    Vector3d rWrist = rWrist0 + w * rArmRest + torsoShift + rLoop;
    Vector3d lWrist = lWrist0 + w * lArmRest + torsoShift + lLoop;
    Vector3d headPos = head;

    const double step = std::sin(std::numbers::pi * v);
    const Vector3d rAnkle = rAnkle0 + amplitude * Vector3d(0.0, 0.25 * step * step, 0.06 * step * step);
    const Vector3d lAnkle = lAnkle0 + amplitude * Vector3d(0.0, -0.05 * step, 0.03 * step * step);

    if (style.jerky) {
      const double time = static_cast<double>(t) / frameRate;
      const double shake = w * std::sin(2.0 * std::numbers::pi * shakeHz * time + shakePhase);
      rWrist += 0.01 * shake * shakeDir;
      lWrist -= 0.01 * shake * shakeDir;
      headPos += 0.005 * shake * shakeDir;
    }

    const std::array<Vector3d, 8> pts = {headPos, chest, pelvis, rShoulder, rWrist, lWrist, rAnkle, lAnkle};
    for (Eigen::Index k = 0; k < m; ++k) {
      Vector3d p = subjectScale * pts[static_cast<size_t>(k)];
      if (t > 0 && noise > 0.0) {
        p += noise * Vector3d(gauss(rng), gauss(rng), gauss(rng));
      }
      mv.frames.block<1, 3>(t, 3 * k) = p.transpose();
    }
  }
  return mv;
}

LabeledDataset makeSyntheticSuite(const SyntheticOptions& options) {
  if (options.perClass == 0 || options.subjects == 0) {
    throw InvalidArgument("synthetic suite needs at least one movement per class and one subject");
  }
  LabeledDataset ds;
  ds.markerSet = syntheticMarkerSet();
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> scaleDist(0.9, 1.1);
  std::vector<double> subjectScales;
  for (size_t s = 0; s < options.subjects; ++s) {
    subjectScales.push_back(scaleDist(rng));
  }
  for (const auto& style : syntheticStyles()) {
    ds.labelSet.push_back(style.label);
    for (size_t i = 0; i < options.perClass; ++i) {
      const size_t subject = i % options.subjects;
      Movement mv = synthesizeMovement(
          style, ds.markerSet, options.frameRate, subjectScales[subject], options.noise, rng);
      mv.sourceId = fmt::format("{}_{:02d}", style.label, i);
      mv.subjectId = fmt::format("s{}", subject);
      ds.movements.push_back(std::move(mv));
    }
  }
  return ds;
}

} // namespace affectmod
