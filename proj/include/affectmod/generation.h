#pragma once

#include "affectmod/dataset.h"
#include "affectmod/filter.h"
#include "affectmod/hmm.h"
#include "affectmod/lma_features.h"
#include "affectmod/rmlr.h"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace affectmod {

struct GenerationConfig {
  size_t numStates = 12;
  /// Copies of the desired path added to the neighbor training set.
  size_t desiredCopies = 0;
  double epsilonFraction = 0.10;
  FilterParams smoothing = FilterParams::butterworth(6.0);
  uint64_t seed = 0;
  BaumWelchOptions training;
  FeatureOptions features;
  /// k for the classifier that labels an unlabeled desired path.
  size_t classifierK = 1;

  void validate() const;
};

/// Per-component z-scoring fit on a reference feature matrix. Constant
/// components map to 0.
struct FeatureScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static FeatureScaler fit(const Eigen::MatrixXd& features);
  [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  [[nodiscard]] Eigen::MatrixXd applyRows(const Eigen::MatrixXd& rows) const;
};

/// A dataset of scale-normalized movements with precomputed LMA features.
struct PreparedDataset {
  LabeledDataset dataset;
  Eigen::MatrixXd features; // N x 27
  FeatureScaler scaler;
  Eigen::MatrixXd standardized; // N x 27
  FeatureOptions featureOptions;

  /// Optionally normalizes every movement's scale, then computes features.
  static PreparedDataset build(
      LabeledDataset dataset,
      const FeatureOptions& options,
      bool normalize = true);

  /// Subset of movements (features are reused, the scaler is refit).
  [[nodiscard]] PreparedDataset subset(const std::vector<size_t>& indices) const;
};

/// LMA components outside the intersection of the two classes' salient sets.
/// Throws StageError "no kinematic subspace" when nothing remains.
std::vector<std::string> selectSubspace(
    const RmlrModel& model,
    std::string_view originalEmotion,
    std::string_view targetEmotion,
    const std::vector<std::string>& allComponents);

struct NeighborSearch {
  std::vector<size_t> indices; // ascending by distance
  std::vector<double> distances; // matching `indices`
  double radius = 0.0;
  double maxDistance = 0.0;
  bool fallback = false;
  std::vector<std::string> warnings;
};

/// Target-class members within epsilonFraction * (distance to the furthest
/// target-class member) of the desired point, measured over `columns` of the
/// standardized features. An empty ball falls back to the single nearest.
NeighborSearch epsilonNeighbors(
    const Eigen::MatrixXd& standardizedFeatures,
    const std::vector<std::string>& labels,
    const Eigen::VectorXd& desiredStandardized,
    std::string_view targetEmotion,
    const std::vector<size_t>& columns,
    double epsilonFraction);

/// Row t is the mean of state states[t].
Eigen::MatrixXd concatenateStateMeans(const GaussianHmm& hmm, const std::vector<size_t>& states);

/// Zero-phase low-pass of every coordinate; length is preserved.
Eigen::MatrixXd smooth(const Eigen::MatrixXd& trajectory, const FilterParams& params, double frameRate);

/// Mean over frames of the Euclidean distance between corresponding rows.
double meanFrameDistance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct GenerationResult {
  /// Same units and length as the desired path.
  Movement output;
  Eigen::MatrixXd unsmoothed;
  std::vector<size_t> stateSequence;
  std::vector<size_t> neighborIndices;
  std::vector<std::string> neighbors;
  std::vector<double> neighborDistances;
  std::vector<std::string> subspace;
  std::string originalEmotion;
  std::string targetEmotion;
  double radius = 0.0;
  bool fallback = false;
  GaussianHmm hmm;
  TrainReport training;
  /// Mean per-frame distance to the desired path before / after smoothing.
  double reconstructionError = 0.0;
  double outputDistance = 0.0;
  std::vector<std::string> warnings;
};

/// Converts `desired` (already scale-normalized like the dataset) to convey
/// `targetEmotion`. Deterministic for a fixed configuration.
GenerationResult generate(
    const Movement& desired,
    std::string_view targetEmotion,
    const PreparedDataset& prepared,
    const RmlrModel& model,
    const GenerationConfig& config);

} // namespace affectmod
