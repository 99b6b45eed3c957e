#include "affectmod/lma_features.h"

#include "affectmod/errors.h"
#include "affectmod/geometry.h"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>

namespace affectmod {

namespace {

constexpr std::array<std::string_view, 7> kScopes = {
    "All", "Torso", "Head", "RHand", "LHand", "RFoot", "LFoot"};

constexpr double kCurvatureFloor = 1e-9;

std::vector<std::string> buildNames() {
  std::vector<std::string> names;
  for (std::string_view effort : {"Weight", "Time", "Flow"}) {
    for (std::string_view scope : kScopes) {
      names.push_back(fmt::format("{}{}", effort, scope));
    }
  }
  for (std::string_view shape :
       {"ShapeZ", "ShapeSag", "ShapeHor", "ShapeFlow", "ShapeDirRHand", "ShapeDirLHand"}) {
    names.emplace_back(shape);
  }
  return names;
}

std::vector<BodyRole> scopeParts(size_t scope) {
  if (scope == 0) {
    return {kAllRoles.begin(), kAllRoles.end()};
  }
  return {kAllRoles[scope - 1]};
}

/// Marker indices and masses of a set of parts; a marker listed in several
/// parts counts once per part.
struct PartMarkers {
  std::vector<Eigen::Index> markers;
  std::vector<double> masses;
};

PartMarkers collectMarkers(const MarkerSet& markerSet, const std::vector<BodyRole>& parts) {
  if (parts.empty()) {
    throw InvalidArgument("effort over an empty set of body parts");
  }
  PartMarkers out;
  for (BodyRole role : parts) {
    const auto indices = markerSet.groupIndices(role);
    if (indices.empty()) {
      throw InvalidArgument(fmt::format("body part '{}' has no markers", roleKey(role)));
    }
    for (size_t m : indices) {
      out.markers.push_back(static_cast<Eigen::Index>(m));
      out.masses.push_back(markerSet.mass(m));
    }
  }
  return out;
}

// Marker kinematics for the full frame matrix (all markers at once).
struct Kinematics {
  Eigen::MatrixXd velocity; // (T-1) x 3M
  Eigen::MatrixXd acceleration; // (T-2) x 3M
  Eigen::MatrixXd jerk; // (T-3) x 3M
};

Kinematics computeKinematics(const Movement& movement, const FeatureOptions& options, int order) {
  Kinematics k;
  const auto& f = options.filter;
  k.velocity = filteredDerivative(movement.frames, movement.frameRate, f, options.perFrameUnits);
  if (order >= 2) {
    k.acceleration = filteredDerivative(k.velocity, movement.frameRate, f, options.perFrameUnits);
  }
  if (order >= 3) {
    k.jerk = filteredDerivative(k.acceleration, movement.frameRate, f, options.perFrameUnits);
  }
  return k;
}

double peakEnergy(const Eigen::MatrixXd& velocity, const PartMarkers& parts) {
  double peak = 0.0;
  for (Eigen::Index t = 0; t < velocity.rows(); ++t) {
    double energy = 0.0;
    for (size_t i = 0; i < parts.markers.size(); ++i) {
      energy += parts.masses[i] * velocity.block<1, 3>(t, 3 * parts.markers[i]).squaredNorm();
    }
    peak = std::max(peak, energy);
  }
  return peak;
}

double peakWeightedNorm(const Eigen::MatrixXd& acceleration, const PartMarkers& parts) {
  double peak = 0.0;
  for (Eigen::Index t = 0; t < acceleration.rows(); ++t) {
    double total = 0.0;
    for (size_t i = 0; i < parts.markers.size(); ++i) {
      total += parts.masses[i] * acceleration.block<1, 3>(t, 3 * parts.markers[i]).norm();
    }
    peak = std::max(peak, total);
  }
  return peak;
}

double summedNorm(const Eigen::MatrixXd& jerk, const PartMarkers& parts) {
  double total = 0.0;
  for (size_t i = 0; i < parts.markers.size(); ++i) {
    for (Eigen::Index t = 0; t < jerk.rows(); ++t) {
      total += jerk.block<1, 3>(t, 3 * parts.markers[i]).norm();
    }
  }
  return total;
}

void requireFrames(const Movement& movement, Eigen::Index minFrames, std::string_view what) {
  if (movement.numFrames() < minFrames) {
    throw InvalidArgument(fmt::format(
        "{} needs at least {} frames, movement '{}' has {}",
        what,
        minFrames,
        movement.sourceId,
        movement.numFrames()));
  }
}

std::string_view trimField(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> splitCsvLine(std::string_view line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    out.emplace_back(trimField(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) {
      break;
    }
    start = comma + 1;
  }
  return out;
}

} // namespace

const std::vector<std::string>& lmaComponentNames() {
  static const std::vector<std::string> names = buildNames();
  return names;
}

int lmaComponentIndex(std::string_view name) {
  const auto& names = lmaComponentNames();
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

double LmaVector::get(std::string_view name) const {
  const int idx = lmaComponentIndex(name);
  if (idx < 0) {
    throw InvalidArgument(fmt::format("unknown LMA component '{}'", name));
  }
  return values[static_cast<size_t>(idx)];
}

Eigen::VectorXd LmaVector::asVector() const {
  return Eigen::Map<const Eigen::VectorXd>(values.data(), kNumLmaComponents);
}

double weightEffort(
    const Movement& movement,
    const MarkerSet& markerSet,
    const std::vector<BodyRole>& parts,
    const FeatureOptions& options) {
  const auto markers = collectMarkers(markerSet, parts);
  requireFrames(movement, 2, "Weight Effort");
  const auto k = computeKinematics(movement, options, 1);
  return peakEnergy(k.velocity, markers);
}

double timeEffort(
    const Movement& movement,
    const MarkerSet& markerSet,
    const std::vector<BodyRole>& parts,
    const FeatureOptions& options) {
  const auto markers = collectMarkers(markerSet, parts);
  requireFrames(movement, 3, "Time Effort");
  const auto k = computeKinematics(movement, options, 2);
  return peakWeightedNorm(k.acceleration, markers);
}

double flowEffort(
    const Movement& movement,
    const MarkerSet& markerSet,
    const std::vector<BodyRole>& parts,
    const FeatureOptions& options) {
  const auto markers = collectMarkers(markerSet, parts);
  requireFrames(movement, 4, "Flow Effort");
  const auto k = computeKinematics(movement, options, 3);
  return summedNorm(k.jerk, markers);
}

ShapingValues shapeShaping(const Movement& movement, const MarkerSet& markerSet) {
  const auto torso = markerSet.groupIndices(BodyRole::Torso);
  if (torso.empty()) {
    throw InvalidArgument("torso group is empty");
  }
  const Eigen::MatrixXd centroid = movement.centroidTrajectory(torso);
  ShapingValues out;
  out.vertical = (centroid.col(2).array() - centroid(0, 2)).abs().maxCoeff();
  out.sagittal = (centroid.col(1).array() - centroid(0, 1)).abs().maxCoeff();

  const Eigen::Index markers = movement.numMarkers();
  Eigen::MatrixX2d projected(markers, 2);
  for (Eigen::Index t = 0; t < movement.numFrames(); ++t) {
    for (Eigen::Index m = 0; m < markers; ++m) {
      projected(m, 0) = movement.frames(t, 3 * m);
      projected(m, 1) = movement.frames(t, 3 * m + 1);
    }
    out.horizontal = std::max(out.horizontal, geometry::convexHullArea(projected));
  }
  return out;
}

double shapeFlow(const Movement& movement, ShapeFlowMode mode) {
  const Eigen::Index markers = movement.numMarkers();
  if (markers < 1) {
    throw InvalidArgument("shape flow needs at least one marker");
  }
  Eigen::MatrixX3d points(markers, 3);
  double peak = 0.0;
  for (Eigen::Index t = 0; t < movement.numFrames(); ++t) {
    for (Eigen::Index m = 0; m < markers; ++m) {
      points.row(m) = movement.frames.block<1, 3>(t, 3 * m);
    }
    const double volume = mode == ShapeFlowMode::BoundingBox
        ? geometry::boundingBoxVolume(points)
        : geometry::convexHullVolume(points);
    peak = std::max(peak, volume);
  }
  return peak;
}

double shapeDirectional(
    const Eigen::MatrixX3d& handTrajectory,
    double frameRate,
    const FilterParams& filter,
    bool perFrameUnits) {
  if (handTrajectory.rows() < 4) {
    throw InvalidArgument(
        fmt::format("directional shape needs at least 4 samples, got {}", handTrajectory.rows()));
  }
  const auto pca = geometry::pcaTop2(handTrajectory);
  // Unitless coordinates, so the degeneracy floor excludes the same samples at
  // every scale; curvature is converted back at the end.
  const Eigen::RowVector2d centroid = pca.projected.colwise().mean();
  const double radius = std::sqrt((pca.projected.rowwise() - centroid).rowwise().squaredNorm().mean());
  if (!(radius > 0.0)) {
    throw NumericalError("directional shape: every sample is stationary");
  }
  const Eigen::MatrixXd unitless = pca.projected / radius;
  const Eigen::MatrixXd velocity = filteredDerivative(unitless, frameRate, filter, perFrameUnits);
  const Eigen::MatrixXd acceleration = filteredDerivative(velocity, frameRate, filter, perFrameUnits);

  // Acceleration sample i sits between velocity samples i and i+1; the
  // velocity there is their average.
  double sum = 0.0;
  size_t count = 0;
  for (Eigen::Index i = 0; i < acceleration.rows(); ++i) {
    const double dx = 0.5 * (velocity(i, 0) + velocity(i + 1, 0));
    const double dy = 0.5 * (velocity(i, 1) + velocity(i + 1, 1));
    const double ddx = acceleration(i, 0);
    const double ddy = acceleration(i, 1);
    const double denom = std::pow(dx * dx + dy * dy, 1.5);
    if (denom < kCurvatureFloor) {
      continue;
    }
    sum += std::abs(ddy * dx - ddx * dy) / denom;
    ++count;
  }
  if (count == 0) {
    throw NumericalError("directional shape: every sample is stationary");
  }
  return sum / static_cast<double>(count) / radius;
}

LmaVector lmaVector(const Movement& movement, const MarkerSet& markerSet, const FeatureOptions& options) {
  requireFrames(movement, 4, "LMA vector");
  if (static_cast<size_t>(movement.numMarkers()) != markerSet.size()) {
    throw InvalidArgument(fmt::format(
        "movement '{}' has {} markers, marker set has {}",
        movement.sourceId,
        movement.numMarkers(),
        markerSet.size()));
  }
  LmaVector out;
  const Kinematics k = computeKinematics(movement, options, 3);
  for (size_t scope = 0; scope < kScopes.size(); ++scope) {
    const auto markers = collectMarkers(markerSet, scopeParts(scope));
    out.values[scope] = peakEnergy(k.velocity, markers);
    out.values[kScopes.size() + scope] = peakWeightedNorm(k.acceleration, markers);
    out.values[2 * kScopes.size() + scope] = summedNorm(k.jerk, markers);
  }
  size_t idx = 3 * kScopes.size();
  const auto shaping = shapeShaping(movement, markerSet);
  out.values[idx++] = shaping.vertical;
  out.values[idx++] = shaping.sagittal;
  out.values[idx++] = shaping.horizontal;
  out.values[idx++] = shapeFlow(movement, options.shapeFlow);
  for (BodyRole hand : {BodyRole::RightHand, BodyRole::LeftHand}) {
    const Eigen::MatrixX3d path = movement.centroidTrajectory(markerSet.groupIndices(hand));
    double curvature = 0.0;
    try {
      curvature = shapeDirectional(path, movement.frameRate, options.filter, options.perFrameUnits);
    } catch (const NumericalError&) {
      // Stationary hand: no pathway to characterize.
      curvature = 0.0;
    }
    out.values[idx++] = curvature;
  }
  for (size_t i = 0; i < kNumLmaComponents; ++i) {
    if (!std::isfinite(out.values[i])) {
      throw NumericalError(fmt::format(
          "{}: non-finite value for movement '{}'", lmaComponentNames()[i], movement.sourceId));
    }
  }
  return out;
}

Eigen::MatrixXd lmaMatrix(
    const std::vector<Movement>& movements,
    const MarkerSet& markerSet,
    const FeatureOptions& options) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(movements.size()), kNumLmaComponents);
  for (size_t i = 0; i < movements.size(); ++i) {
    try {
      out.row(static_cast<Eigen::Index>(i)) = lmaVector(movements[i], markerSet, options).asVector().transpose();
    } catch (const Error& e) {
      throw StageError("features", fmt::format("movement '{}': {}", movements[i].sourceId, e.what()));
    }
  }
  return out;
}

std::string featureCsv(
    const std::vector<std::string>& sourceIds,
    const std::vector<std::string>& labels,
    const Eigen::MatrixXd& features) {
  if (sourceIds.size() != static_cast<size_t>(features.rows()) || labels.size() != sourceIds.size() ||
      features.cols() != static_cast<Eigen::Index>(kNumLmaComponents)) {
    throw InvalidArgument("feature table dimensions do not agree");
  }
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "source_id,label");
  for (const auto& name : lmaComponentNames()) {
    fmt::format_to(std::back_inserter(out), ",{}", name);
  }
  out.push_back('\n');
  for (size_t i = 0; i < sourceIds.size(); ++i) {
    fmt::format_to(std::back_inserter(out), "{},{}", sourceIds[i], labels[i]);
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      fmt::format_to(std::back_inserter(out), ",{}", features(static_cast<Eigen::Index>(i), c));
    }
    out.push_back('\n');
  }
  return fmt::to_string(out);
}

FeatureTable parseFeatureCsv(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    const auto line = trimField(text.substr(pos, end - pos));
    if (!line.empty()) {
      lines.push_back(line);
    }
    pos = end + 1;
  }
  if (lines.empty()) {
    throw ParseError("feature CSV is empty", 1);
  }
  const auto header = splitCsvLine(lines[0]);
  if (header.size() < 2 || header[0] != "source_id" || header[1] != "label") {
    throw ParseError("feature CSV header must start with 'source_id,label'", 1);
  }
  FeatureTable table;
  table.featureNames = lmaComponentNames();
  std::vector<size_t> columnOf(kNumLmaComponents);
  for (size_t j = 0; j < kNumLmaComponents; ++j) {
    const auto it = std::find(header.begin(), header.end(), table.featureNames[j]);
    if (it == header.end()) {
      throw ParseError(fmt::format("missing feature column '{}'", table.featureNames[j]), 1);
    }
    columnOf[j] = static_cast<size_t>(it - header.begin());
  }
  table.features.resize(static_cast<Eigen::Index>(lines.size() - 1), kNumLmaComponents);
  for (size_t r = 1; r < lines.size(); ++r) {
    const auto fields = splitCsvLine(lines[r]);
    if (fields.size() != header.size()) {
      throw ParseError(
          fmt::format("expected {} columns, found {}", header.size(), fields.size()), r + 1);
    }
    table.sourceIds.push_back(fields[0]);
    table.labels.push_back(fields[1]);
    for (size_t j = 0; j < kNumLmaComponents; ++j) {
      const auto& field = fields[columnOf[j]];
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
        throw ParseError(
            fmt::format("bad value '{}' in column '{}'", field, table.featureNames[j]), r + 1);
      }
      table.features(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j)) = value;
    }
  }
  return table;
}

} // namespace affectmod
