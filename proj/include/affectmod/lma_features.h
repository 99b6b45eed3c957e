#pragma once

#include "affectmod/dataset.h"
#include "affectmod/filter.h"

#include <Eigen/Core>

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace affectmod {

inline constexpr size_t kNumLmaComponents = 27;

/// Canonical component order: Weight, Time and Flow over the scopes
/// All/Torso/Head/RHand/LHand/RFoot/LFoot, then ShapeZ, ShapeSag, ShapeHor,
/// ShapeFlow, ShapeDirRHand, ShapeDirLHand.
const std::vector<std::string>& lmaComponentNames();

/// Index of a component name in the canonical order, or -1.
int lmaComponentIndex(std::string_view name);

enum class ShapeFlowMode { BoundingBox, ConvexHull };

struct FeatureOptions {
  FilterParams filter = FilterParams::butterworth(8.0);
  /// Derivatives use one frame as the time unit; false switches to seconds.
  bool perFrameUnits = true;
  ShapeFlowMode shapeFlow = ShapeFlowMode::BoundingBox;

  static FeatureOptions unfiltered() {
    FeatureOptions o;
    o.filter = FilterParams::disabled();
    return o;
  }
};

/// The 27 Effort/Shape values of one movement.
struct LmaVector {
  std::array<double, kNumLmaComponents> values{};

  [[nodiscard]] double operator[](size_t i) const {
    return values[i];
  }
  /// Value by component name; throws InvalidArgument for unknown names.
  [[nodiscard]] double get(std::string_view name) const;
  [[nodiscard]] Eigen::VectorXd asVector() const;

  bool operator==(const LmaVector&) const = default;
};

/// Peak over time of the summed kinetic energy (mass x squared speed) of the
/// markers in `parts`.
double weightEffort(
    const Movement& movement,
    const MarkerSet& markerSet,
    const std::vector<BodyRole>& parts,
    const FeatureOptions& options = {});

/// Peak over time of the mass-weighted sum of acceleration magnitudes.
double timeEffort(
    const Movement& movement,
    const MarkerSet& markerSet,
    const std::vector<BodyRole>& parts,
    const FeatureOptions& options = {});

/// Jerk magnitude accumulated over the movement and over all markers in `parts`.
double flowEffort(
    const Movement& movement,
    const MarkerSet& markerSet,
    const std::vector<BodyRole>& parts,
    const FeatureOptions& options = {});

struct ShapingValues {
  double vertical = 0.0; // ShapeZ
  double sagittal = 0.0; // ShapeSag
  double horizontal = 0.0; // ShapeHor
};

/// Axis convention: z up, y sagittal-forward, x lateral. Vertical and sagittal
/// values are the peak displacement of the torso centroid from frame 0; the
/// horizontal value is the peak area of the x-y convex hull of all markers.
ShapingValues shapeShaping(const Movement& movement, const MarkerSet& markerSet);

/// Peak over time of the body's bounding-box (or convex-hull) volume.
double shapeFlow(const Movement& movement, ShapeFlowMode mode = ShapeFlowMode::BoundingBox);

/// Mean unsigned curvature of a T x 3 hand path within its top-2 PCA plane.
/// Samples where (x'^2 + y'^2)^{3/2} < 1e-9 are skipped.
double shapeDirectional(
    const Eigen::MatrixX3d& handTrajectory,
    double frameRate,
    const FilterParams& filter,
    bool perFrameUnits = true);

/// All 27 components. A stationary or degenerate hand path yields a
/// directional value of 0.
LmaVector lmaVector(
    const Movement& movement,
    const MarkerSet& markerSet,
    const FeatureOptions& options = {});

/// Feature rows for every movement (N x 27).
Eigen::MatrixXd lmaMatrix(
    const std::vector<Movement>& movements,
    const MarkerSet& markerSet,
    const FeatureOptions& options = {});

/// `source_id,label,<27 components>` CSV, one row per movement.
std::string featureCsv(
    const std::vector<std::string>& sourceIds,
    const std::vector<std::string>& labels,
    const Eigen::MatrixXd& features);

struct FeatureTable {
  std::vector<std::string> sourceIds;
  std::vector<std::string> labels;
  std::vector<std::string> featureNames;
  Eigen::MatrixXd features;
};

/// Parses a feature CSV; every canonical component column must be present.
FeatureTable parseFeatureCsv(std::string_view text);

} // namespace affectmod
