#pragma once

#include "affectmod/dataset.h"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace affectmod {

/// One cell of the speed x jerkiness x posture contrast.
struct SyntheticStyle {
  std::string label;
  bool fast = false;
  bool jerky = false;
  bool high = false;
};

/// anger (slow, jerky, high), fear (fast, jerky, low), happy (fast, smooth,
/// high) and sad (slow, smooth, low).
const std::vector<SyntheticStyle>& syntheticStyles();

struct SyntheticOptions {
  size_t perClass = 20;
  double frameRate = 120.0;
  uint64_t seed = 0;
  /// Standard deviation of the per-coordinate marker noise, in meters.
  double noise = 0.0005;
  size_t subjects = 5;
};

/// Eight markers (head, chest, pelvis, right_shoulder, both wrists, both
/// ankles) with all six body-part groups populated.
MarkerSet syntheticMarkerSet();

/// One movement starting from the T-pose; subject-level variation comes from
/// `subjectScale`, the rest from `rng`.
Movement synthesizeMovement(
    const SyntheticStyle& style,
    const MarkerSet& markerSet,
    double frameRate,
    double subjectScale,
    double noise,
    std::mt19937_64& rng);

/// The labeled four-class suite, in meters (not scale-normalized).
LabeledDataset makeSyntheticSuite(const SyntheticOptions& options = {});

} // namespace affectmod
