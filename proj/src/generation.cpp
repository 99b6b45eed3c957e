#include "affectmod/generation.h"

#include "affectmod/errors.h"
#include "affectmod/evaluation.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace affectmod {

namespace {

template <typename Fn>
auto runStage(std::string_view stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(std::string(stage), e.what());
  }
}

} // namespace

void GenerationConfig::validate() const {
  if (numStates < 2) {
    throw InvalidArgument(fmt::format("number of states must be >= 2, got {}", numStates));
  }
  if (!(epsilonFraction > 0.0 && epsilonFraction <= 1.0)) {
    throw InvalidArgument(fmt::format("epsilon fraction must lie in (0, 1], got {}", epsilonFraction));
  }
  if (classifierK < 1) {
    throw InvalidArgument("classifier k must be >= 1");
  }
}

FeatureScaler FeatureScaler::fit(const Eigen::MatrixXd& features) {
  if (features.rows() == 0) {
    throw InvalidArgument("cannot fit a scaler on an empty feature matrix");
  }
  FeatureScaler s;
  s.mean = features.colwise().mean().transpose();
  s.scale.resize(features.cols());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const double var =
        (features.col(j).array() - s.mean(j)).square().sum() / static_cast<double>(features.rows());
    const double sd = std::sqrt(var);
    s.scale(j) = sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))) ? sd : 0.0;
  }
  return s;
}

Eigen::VectorXd FeatureScaler::apply(const Eigen::VectorXd& x) const {
  if (x.size() != mean.size()) {
    throw InvalidArgument("feature dimension does not match the scaler");
  }
  Eigen::VectorXd out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    out(j) = scale(j) > 0.0 ? (x(j) - mean(j)) / scale(j) : 0.0;
  }
  return out;
}

Eigen::MatrixXd FeatureScaler::applyRows(const Eigen::MatrixXd& rows) const {
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    out.row(i) = apply(Eigen::VectorXd(rows.row(i).transpose())).transpose();
  }
  return out;
}

PreparedDataset PreparedDataset::build(
    LabeledDataset dataset,
    const FeatureOptions& options,
    bool normalize) {
  PreparedDataset p;
  if (normalize) {
    for (auto& m : dataset.movements) {
      m = normalizeScale(m, dataset.markerSet);
    }
  }
  p.features = lmaMatrix(dataset.movements, dataset.markerSet, options);
  p.scaler = FeatureScaler::fit(p.features);
  p.standardized = p.scaler.applyRows(p.features);
  p.featureOptions = options;
  p.dataset = std::move(dataset);
  return p;
}

PreparedDataset PreparedDataset::subset(const std::vector<size_t>& indices) const {
  PreparedDataset p;
  p.dataset.markerSet = dataset.markerSet;
  p.dataset.labelSet = dataset.labelSet;
  p.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  for (size_t i = 0; i < indices.size(); ++i) {
    p.dataset.movements.push_back(dataset.movements.at(indices[i]));
    p.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(indices[i]));
  }
  p.scaler = FeatureScaler::fit(p.features);
  p.standardized = p.scaler.applyRows(p.features);
  p.featureOptions = featureOptions;
  return p;
}

std::vector<std::string> selectSubspace(
    const RmlrModel& model,
    std::string_view originalEmotion,
    std::string_view targetEmotion,
    const std::vector<std::string>& allComponents) {
  const auto original = salientComponents(model, originalEmotion);
  const auto target = salientComponents(model, targetEmotion);
  auto subspace = nondiscriminativeSet(allComponents, original, target);
  if (subspace.empty()) {
    throw StageError(
        "subspace",
        fmt::format("no kinematic subspace left for {} -> {}", originalEmotion, targetEmotion));
  }
  return subspace;
}

NeighborSearch epsilonNeighbors(
    const Eigen::MatrixXd& standardizedFeatures,
    const std::vector<std::string>& labels,
    const Eigen::VectorXd& desiredStandardized,
    std::string_view targetEmotion,
    const std::vector<size_t>& columns,
    double epsilonFraction) {
  if (labels.size() != static_cast<size_t>(standardizedFeatures.rows())) {
    throw InvalidArgument("labels and feature rows differ in length");
  }
  if (columns.empty()) {
    throw InvalidArgument("neighbor search over an empty subspace");
  }
  std::vector<size_t> members;
  std::vector<double> dist;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != targetEmotion) {
      continue;
    }
    double sq = 0.0;
    for (size_t c : columns) {
      const double diff = standardizedFeatures(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) -
          desiredStandardized(static_cast<Eigen::Index>(c));
      sq += diff * diff;
    }
    members.push_back(i);
    dist.push_back(std::sqrt(sq));
  }
  if (members.empty()) {
    throw InvalidArgument(fmt::format("no movements labeled '{}'", targetEmotion));
  }

  std::vector<size_t> order(members.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return dist[a] < dist[b]; });

  NeighborSearch out;
  out.maxDistance = *std::max_element(dist.begin(), dist.end());
  out.radius = epsilonFraction * out.maxDistance;
  for (size_t o : order) {
    if (dist[o] <= out.radius) {
      out.indices.push_back(members[o]);
      out.distances.push_back(dist[o]);
    }
  }
  if (out.indices.empty()) {
    out.fallback = true;
    out.indices.push_back(members[order.front()]);
    out.distances.push_back(dist[order.front()]);
    out.warnings.push_back(fmt::format(
        "epsilon ball of radius {} is empty; using the single nearest '{}' movement",
        out.radius,
        targetEmotion));
  }
  return out;
}

Eigen::MatrixXd concatenateStateMeans(const GaussianHmm& hmm, const std::vector<size_t>& states) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(states.size()), hmm.dim());
  for (size_t t = 0; t < states.size(); ++t) {
    if (states[t] >= hmm.numStates()) {
      throw InvalidArgument(fmt::format("state {} out of range", states[t]));
    }
    out.row(static_cast<Eigen::Index>(t)) = hmm.means.row(static_cast<Eigen::Index>(states[t]));
  }
  return out;
}

Eigen::MatrixXd smooth(const Eigen::MatrixXd& trajectory, const FilterParams& params, double frameRate) {
  FilterParams p = params;
  p.zeroPhase = true;
  return lowPass(trajectory, frameRate, p);
}

double meanFrameDistance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0) {
    throw InvalidArgument("trajectories must have identical, non-empty shapes");
  }
  return (a - b).rowwise().norm().mean();
}

GenerationResult generate(
    const Movement& desired,
    std::string_view targetEmotion,
    const PreparedDataset& prepared,
    const RmlrModel& model,
    const GenerationConfig& config) {
  runStage("config", [&] {
    config.validate();
    desired.validate(prepared.dataset.markerSet.size());
    if (!prepared.dataset.labelIndex(targetEmotion)) {
      throw InvalidArgument(fmt::format("unknown target emotion '{}'", targetEmotion));
    }
    return 0;
  });

  GenerationResult result;
  result.targetEmotion = std::string(targetEmotion);
  const auto& markerSet = prepared.dataset.markerSet;
  const auto labels = prepared.dataset.labels();

  // (1) Effort/Shape representation of the desired path.
  const Eigen::VectorXd desiredFeatures = runStage("features", [&] {
    return lmaVector(desired, markerSet, prepared.featureOptions).asVector();
  });

  // (2) Original emotion and the non-discriminative subspace.
  result.originalEmotion = runStage("classify", [&] {
    if (desired.label) {
      return *desired.label;
    }
    return knnClassify(prepared.features, labels, desiredFeatures.transpose(), config.classifierK).front();
  });
  result.subspace = runStage("subspace", [&] {
    return selectSubspace(model, result.originalEmotion, targetEmotion, lmaComponentNames());
  });
  std::vector<size_t> columns;
  for (const auto& name : result.subspace) {
    const int idx = lmaComponentIndex(name);
    if (idx < 0) {
      throw StageError("subspace", fmt::format("model feature '{}' is not an LMA component", name));
    }
    columns.push_back(static_cast<size_t>(idx));
  }

  // (3) Epsilon neighborhood within the target class.
  const auto search = runStage("neighbors", [&] {
    return epsilonNeighbors(
        prepared.standardized,
        labels,
        prepared.scaler.apply(desiredFeatures),
        targetEmotion,
        columns,
        config.epsilonFraction);
  });
  result.radius = search.radius;
  result.fallback = search.fallback;
  result.warnings.insert(result.warnings.end(), search.warnings.begin(), search.warnings.end());

  // (4) HMM of the neighbors plus n_d copies of the desired path.
  std::vector<Eigen::MatrixXd> sequences;
  for (size_t i = 0; i < search.indices.size(); ++i) {
    const auto& m = prepared.dataset.movements[search.indices[i]];
    if (static_cast<size_t>(m.numFrames()) < config.numStates) {
      result.warnings.push_back(fmt::format(
          "neighbor '{}' has {} frames (< {} states); dropped",
          m.sourceId,
          m.numFrames(),
          config.numStates));
      continue;
    }
    sequences.push_back(m.frames);
    result.neighborIndices.push_back(search.indices[i]);
    result.neighbors.push_back(m.sourceId);
    result.neighborDistances.push_back(search.distances[i]);
  }
  if (sequences.empty()) {
    throw StageError("training", "every neighbor is shorter than the number of states");
  }
  if (config.desiredCopies > 0 && static_cast<size_t>(desired.numFrames()) < config.numStates) {
    throw StageError("training", "desired path is shorter than the number of states");
  }
  for (size_t c = 0; c < config.desiredCopies; ++c) {
    sequences.push_back(desired.frames);
  }
  std::tie(result.hmm, result.training) = runStage("training", [&] {
    const auto init = initSegmental(sequences, config.numStates, config.training.covarianceFloor);
    return baumWelch(sequences, init, config.training);
  });

  // (5) Most likely state sequence of the desired path.
  result.stateSequence = runStage("viterbi", [&] { return viterbi(result.hmm, desired.frames); });

  // (6) State-mean concatenation and (7) smoothing.
  result.unsmoothed = concatenateStateMeans(result.hmm, result.stateSequence);
  const Eigen::MatrixXd smoothed = runStage("smoothing", [&] {
    return smooth(result.unsmoothed, config.smoothing, desired.frameRate);
  });

  result.output.frames = smoothed;
  result.output.frameRate = desired.frameRate;
  result.output.label = result.targetEmotion;
  result.output.subjectId = desired.subjectId;
  result.output.sourceId = fmt::format("{}_to_{}", desired.sourceId, targetEmotion);
  result.output.appliedScale = desired.appliedScale;
  result.reconstructionError = meanFrameDistance(result.unsmoothed, desired.frames);
  result.outputDistance = meanFrameDistance(smoothed, desired.frames);
  return result;
}

} // namespace affectmod
