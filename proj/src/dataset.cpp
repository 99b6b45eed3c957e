#include "affectmod/dataset.h"

#include "affectmod/errors.h"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace affectmod {

namespace {

constexpr std::array<std::pair<BodyRole, std::pair<std::string_view, std::string_view>>, 6>
    kRoleNames = {{
        {BodyRole::Torso, {"torso", "Torso"}},
        {BodyRole::Head, {"head", "Head"}},
        {BodyRole::RightHand, {"right_hand", "RHand"}},
        {BodyRole::LeftHand, {"left_hand", "LHand"}},
        {BodyRole::RightFoot, {"right_foot", "RFoot"}},
        {BodyRole::LeftFoot, {"left_foot", "LFoot"}},
    }};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> splitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parseDouble(std::string_view field) {
  if (!field.empty() && field.front() == '+') {
    field.remove_prefix(1);
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    return std::nullopt;
  }
  return value;
}

} // namespace

std::string_view roleKey(BodyRole role) {
  for (const auto& [r, names] : kRoleNames) {
    if (r == role) {
      return names.first;
    }
  }
  return {};
}

std::string_view roleShortName(BodyRole role) {
  for (const auto& [r, names] : kRoleNames) {
    if (r == role) {
      return names.second;
    }
  }
  return {};
}

std::optional<BodyRole> roleFromKey(std::string_view key) {
  for (const auto& [r, names] : kRoleNames) {
    if (names.first == key) {
      return r;
    }
  }
  return std::nullopt;
}

std::optional<size_t> MarkerSet::find(std::string_view name) const {
  const auto it = std::find(markers.begin(), markers.end(), name);
  if (it == markers.end()) {
    return std::nullopt;
  }
  return static_cast<size_t>(it - markers.begin());
}

size_t MarkerSet::index(std::string_view name) const {
  if (auto idx = find(name)) {
    return *idx;
  }
  throw InvalidArgument(fmt::format("unknown marker '{}'", name));
}

std::vector<size_t> MarkerSet::groupIndices(BodyRole role) const {
  std::vector<size_t> result;
  const auto it = groups.find(role);
  if (it == groups.end()) {
    return result;
  }
  for (const auto& name : it->second) {
    result.push_back(index(name));
  }
  return result;
}

double MarkerSet::mass(size_t markerIndex) const {
  const auto it = massCoefficients.find(markers.at(markerIndex));
  return it == massCoefficients.end() ? 1.0 : it->second;
}

void MarkerSet::validate() const {
  if (markers.empty()) {
    throw InvalidArgument("marker set is empty");
  }
  std::set<std::string> unique(markers.begin(), markers.end());
  if (unique.size() != markers.size()) {
    throw InvalidArgument("marker set contains duplicate names");
  }
  for (BodyRole role : kAllRoles) {
    const auto it = groups.find(role);
    if (it == groups.end() || it->second.empty()) {
      throw InvalidArgument(fmt::format("marker group '{}' is missing or empty", roleKey(role)));
    }
    for (const auto& name : it->second) {
      if (!find(name)) {
        throw InvalidArgument(
            fmt::format("group '{}' references unknown marker '{}'", roleKey(role), name));
      }
    }
  }
  for (const auto& [name, value] : massCoefficients) {
    if (!find(name)) {
      throw InvalidArgument(fmt::format("mass coefficient for unknown marker '{}'", name));
    }
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw InvalidArgument(fmt::format("mass coefficient of '{}' must be positive", name));
    }
  }
  if (!find(scalePair.first) || !find(scalePair.second)) {
    throw InvalidArgument(fmt::format(
        "scale pair ({}, {}) references unknown markers", scalePair.first, scalePair.second));
  }
}

Eigen::MatrixXd Movement::centroidTrajectory(const std::vector<size_t>& markers) const {
  if (markers.empty()) {
    throw InvalidArgument("centroid of an empty marker group");
  }
  Eigen::MatrixXd centroid = Eigen::MatrixXd::Zero(frames.rows(), 3);
  for (size_t m : markers) {
    centroid += frames.middleCols(3 * static_cast<Eigen::Index>(m), 3);
  }
  return centroid / static_cast<double>(markers.size());
}

void Movement::validate(size_t expectedMarkers) const {
  if (frames.rows() < 2) {
    throw InvalidArgument(fmt::format("movement '{}' has fewer than 2 frames", sourceId));
  }
  if (frames.cols() == 0 || frames.cols() % 3 != 0) {
    throw InvalidArgument(fmt::format("movement '{}' has a malformed frame layout", sourceId));
  }
  if (expectedMarkers != 0 && static_cast<size_t>(numMarkers()) != expectedMarkers) {
    throw InvalidArgument(fmt::format(
        "movement '{}' has {} markers, expected {}", sourceId, numMarkers(), expectedMarkers));
  }
  if (!frames.allFinite()) {
    throw InvalidArgument(fmt::format("movement '{}' contains non-finite coordinates", sourceId));
  }
  if (!(frameRate > 0.0) || !std::isfinite(frameRate)) {
    throw InvalidArgument(fmt::format("movement '{}' has a non-positive frame rate", sourceId));
  }
}

std::optional<size_t> LabeledDataset::labelIndex(std::string_view label) const {
  const auto it = std::find(labelSet.begin(), labelSet.end(), label);
  if (it == labelSet.end()) {
    return std::nullopt;
  }
  return static_cast<size_t>(it - labelSet.begin());
}

std::optional<size_t> LabeledDataset::findMovement(std::string_view sourceId) const {
  for (size_t i = 0; i < movements.size(); ++i) {
    if (movements[i].sourceId == sourceId) {
      return i;
    }
  }
  return std::nullopt;
}

std::vector<std::string> LabeledDataset::labels() const {
  std::vector<std::string> result;
  result.reserve(movements.size());
  for (const auto& m : movements) {
    result.push_back(m.label.value_or(std::string{}));
  }
  return result;
}

void LabeledDataset::validate() const {
  markerSet.validate();
  std::set<std::string> unique(labelSet.begin(), labelSet.end());
  if (unique.size() != labelSet.size()) {
    throw InvalidArgument("label set contains duplicates");
  }
  std::vector<size_t> counts(labelSet.size(), 0);
  for (const auto& m : movements) {
    m.validate(markerSet.size());
    if (m.label) {
      const auto idx = labelIndex(*m.label);
      if (!idx) {
        throw InvalidArgument(
            fmt::format("movement '{}': unknown label '{}'", m.sourceId, *m.label));
      }
      ++counts[*idx];
    }
  }
  for (size_t k = 0; k < labelSet.size(); ++k) {
    if (counts[k] == 0) {
      throw InvalidArgument(fmt::format("label '{}' has no movements", labelSet[k]));
    }
  }
}

Movement parseTrajectoryCsv(
    std::string_view text,
    const MarkerSet& markerSet,
    double frameRate,
    std::string sourceId) {
  const size_t expectedColumns = 1 + 3 * markerSet.size();
  std::vector<double> values;
  size_t rows = 0;
  size_t lineNo = 0;
  bool sawData = false;

  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++lineNo;
    if (line.empty()) {
      if (end == text.size()) {
        break;
      }
      continue;
    }
    if (line.front() == '#') {
      // "# frame_rate=<Hz>"
      std::string_view body = trim(line.substr(1));
      constexpr std::string_view key = "frame_rate";
      if (body.substr(0, key.size()) == key) {
        body = trim(body.substr(key.size()));
        if (!body.empty() && (body.front() == '=' || body.front() == ':')) {
          body = trim(body.substr(1));
        }
        const auto rate = parseDouble(body);
        if (!rate || !(*rate > 0.0) || !std::isfinite(*rate)) {
          throw ParseError("invalid frame_rate comment", lineNo);
        }
        frameRate = *rate;
      }
      continue;
    }

    const auto fields = splitFields(line);
    if (fields.size() != expectedColumns) {
      throw ParseError(
          fmt::format(
              "marker-count mismatch: {} columns, expected {} (1 + 3 x {} markers)",
              fields.size(),
              expectedColumns,
              markerSet.size()),
          lineNo);
    }
    if (!sawData && !parseDouble(fields[0])) {
      // Header row; the marker columns must follow the marker set order.
      for (size_t m = 0; m < markerSet.size(); ++m) {
        for (size_t c = 0; c < 3; ++c) {
          const std::string expected = fmt::format("{}_{}", markerSet.markers[m], "xyz"[c]);
          if (fields[1 + 3 * m + c] != expected) {
            throw ParseError(
                fmt::format(
                    "header column '{}' does not match expected '{}'",
                    fields[1 + 3 * m + c],
                    expected),
                lineNo);
          }
        }
      }
      sawData = true;
      continue;
    }
    sawData = true;
    for (size_t c = 0; c < fields.size(); ++c) {
      const auto value = parseDouble(fields[c]);
      if (!value) {
        throw ParseError(fmt::format("malformed value '{}' in column {}", fields[c], c + 1), lineNo);
      }
      if (!std::isfinite(*value)) {
        throw ParseError(fmt::format("non-finite value '{}' in column {}", fields[c], c + 1), lineNo);
      }
      if (c > 0) {
        values.push_back(*value);
      }
    }
    ++rows;
  }

  Movement movement;
  movement.sourceId = std::move(sourceId);
  movement.frameRate = frameRate;
  const auto cols = static_cast<Eigen::Index>(3 * markerSet.size());
  movement.frames = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(rows), cols);
  if (rows < 2) {
    throw ParseError(fmt::format("trajectory has {} frames, need at least 2", rows), lineNo);
  }
  if (!(frameRate > 0.0)) {
    throw ParseError("frame rate must be positive", 1);
  }
  return movement;
}

std::string serializeTrajectoryCsv(const Movement& movement, const MarkerSet& markerSet) {
  if (static_cast<size_t>(movement.numMarkers()) != markerSet.size()) {
    throw InvalidArgument("movement does not match the marker set");
  }
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "# frame_rate={}\nframe", movement.frameRate);
  for (const auto& name : markerSet.markers) {
    fmt::format_to(std::back_inserter(out), ",{0}_x,{0}_y,{0}_z", name);
  }
  out.push_back('\n');
  for (Eigen::Index t = 0; t < movement.frames.rows(); ++t) {
    fmt::format_to(std::back_inserter(out), "{}", t);
    for (Eigen::Index c = 0; c < movement.frames.cols(); ++c) {
      fmt::format_to(std::back_inserter(out), ",{}", movement.frames(t, c));
    }
    out.push_back('\n');
  }
  return fmt::to_string(out);
}

std::string readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError(fmt::format("cannot read file '{}'", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void writeFile(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(fmt::format("cannot write file '{}'", path.string()));
  }
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) {
    throw Error(fmt::format("failed writing '{}'", path.string()));
  }
}

LabeledDataset loadDatasetFromManifest(
    std::string_view manifestJson,
    const std::filesystem::path& baseDir) {
  using nlohmann::json;
  json manifest;
  try {
    manifest = json::parse(manifestJson);
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("manifest is not valid JSON: {}", e.what()));
  }

  LabeledDataset dataset;
  try {
    const double frameRate = manifest.at("frame_rate").get<double>();
    dataset.markerSet.markers = manifest.at("markers").get<std::vector<std::string>>();
    for (const auto& [key, names] : manifest.at("groups").items()) {
      const auto role = roleFromKey(key);
      if (!role) {
        throw LoadError(fmt::format("manifest: unknown group role '{}'", key));
      }
      dataset.markerSet.groups[*role] = names.get<std::vector<std::string>>();
    }
    if (manifest.contains("mass_coefficients")) {
      dataset.markerSet.massCoefficients =
          manifest.at("mass_coefficients").get<std::map<std::string, double>>();
    }
    if (manifest.contains("scale_pair")) {
      const auto pair = manifest.at("scale_pair").get<std::vector<std::string>>();
      if (pair.size() != 2) {
        throw LoadError("manifest: scale_pair must name exactly two markers");
      }
      dataset.markerSet.scalePair = {pair[0], pair[1]};
    }
    dataset.labelSet = manifest.at("label_set").get<std::vector<std::string>>();
    try {
      dataset.markerSet.validate();
    } catch (const InvalidArgument& e) {
      throw LoadError(fmt::format("manifest: inconsistent marker set: {}", e.what()));
    }

    const auto& entries = manifest.at("movements");
    for (size_t i = 0; i < entries.size(); ++i) {
      const auto& entry = entries[i];
      const std::string file = entry.at("file").get<std::string>();
      const std::string where = fmt::format("movement entry {} ('{}')", i, file);
      std::string label;
      if (entry.contains("label")) {
        label = entry.at("label").get<std::string>();
        if (std::find(dataset.labelSet.begin(), dataset.labelSet.end(), label) ==
            dataset.labelSet.end()) {
          throw LoadError(fmt::format("{}: unknown label '{}'", where, label));
        }
      }
      const std::filesystem::path path = baseDir / file;
      if (!std::filesystem::exists(path)) {
        throw LoadError(fmt::format("{}: missing file '{}'", where, path.string()));
      }
      const std::string id = entry.contains("id") ? entry.at("id").get<std::string>()
                                                  : std::filesystem::path(file).stem().string();
      const double rate = entry.contains("frame_rate") ? entry.at("frame_rate").get<double>()
                                                       : frameRate;
      Movement movement;
      try {
        movement = parseTrajectoryCsv(readFile(path), dataset.markerSet, rate, id);
      } catch (const ParseError& e) {
        throw LoadError(fmt::format("{}: {}", where, e.what()));
      }
      if (!label.empty()) {
        movement.label = label;
      }
      if (entry.contains("subject")) {
        movement.subjectId = entry.at("subject").get<std::string>();
      }
      dataset.movements.push_back(std::move(movement));
    }
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("manifest: {}", e.what()));
  }

  std::set<std::string> ids;
  for (const auto& m : dataset.movements) {
    if (!ids.insert(m.sourceId).second) {
      throw LoadError(fmt::format("manifest: duplicate movement id '{}'", m.sourceId));
    }
  }
  try {
    dataset.validate();
  } catch (const InvalidArgument& e) {
    throw LoadError(fmt::format("manifest: {}", e.what()));
  }
  return dataset;
}

LabeledDataset loadDataset(const std::filesystem::path& manifestPath) {
  return loadDatasetFromManifest(readFile(manifestPath), manifestPath.parent_path());
}

void writeDataset(const LabeledDataset& dataset, const std::filesystem::path& dir) {
  using nlohmann::ordered_json;
  std::filesystem::create_directories(dir);
  ordered_json manifest;
  const double frameRate = dataset.movements.empty() ? 120.0 : dataset.movements.front().frameRate;
  manifest["frame_rate"] = frameRate;
  manifest["markers"] = dataset.markerSet.markers;
  ordered_json groups = ordered_json::object();
  for (BodyRole role : kAllRoles) {
    const auto it = dataset.markerSet.groups.find(role);
    groups[std::string(roleKey(role))] =
        it == dataset.markerSet.groups.end() ? std::vector<std::string>{} : it->second;
  }
  manifest["groups"] = groups;
  manifest["scale_pair"] = {dataset.markerSet.scalePair.first, dataset.markerSet.scalePair.second};
  manifest["label_set"] = dataset.labelSet;
  ordered_json entries = ordered_json::array();
  for (const auto& m : dataset.movements) {
    const std::string file = m.sourceId + ".csv";
    writeFile(dir / file, serializeTrajectoryCsv(m, dataset.markerSet));
    ordered_json entry;
    entry["file"] = file;
    entry["id"] = m.sourceId;
    if (m.label) {
      entry["label"] = *m.label;
    }
    if (m.subjectId) {
      entry["subject"] = *m.subjectId;
    }
    if (m.frameRate != frameRate) {
      entry["frame_rate"] = m.frameRate;
    }
    entries.push_back(entry);
  }
  manifest["movements"] = entries;
  writeFile(dir / "manifest.json", manifest.dump(2) + "\n");
}

Movement resample(const Movement& movement, double targetRate) {
  if (!(targetRate > 0.0)) {
    throw InvalidArgument("target rate must be positive");
  }
  const Eigen::Index frames = movement.numFrames();
  if (frames < 2) {
    throw InvalidArgument("cannot resample a movement with fewer than 2 frames");
  }
  Movement out = movement;
  out.frameRate = targetRate;
  if (targetRate == movement.frameRate) {
    return out;
  }
  const double duration = static_cast<double>(frames - 1) / movement.frameRate;
  const auto newFrames =
      static_cast<Eigen::Index>(std::llround(duration * targetRate)) + 1;
  if (newFrames < 2) {
    throw InvalidArgument("resampled movement would have fewer than 2 frames");
  }
  out.frames.resize(newFrames, movement.frames.cols());
  const double step = static_cast<double>(frames - 1) / static_cast<double>(newFrames - 1);
  for (Eigen::Index t = 0; t < newFrames; ++t) {
    if (t == newFrames - 1) {
      out.frames.row(t) = movement.frames.row(frames - 1);
      continue;
    }
    const double src = static_cast<double>(t) * step;
    const auto lo = std::min(static_cast<Eigen::Index>(std::floor(src)), frames - 2);
    const double w = src - static_cast<double>(lo);
    if (w == 0.0) {
      out.frames.row(t) = movement.frames.row(lo);
    } else {
      out.frames.row(t) = (1.0 - w) * movement.frames.row(lo) + w * movement.frames.row(lo + 1);
    }
  }
  return out;
}

Movement normalizeScale(const Movement& movement, const MarkerSet& markerSet) {
  const size_t a = markerSet.index(markerSet.scalePair.first);
  const size_t b = markerSet.index(markerSet.scalePair.second);
  if (movement.numFrames() < 1 || static_cast<size_t>(movement.numMarkers()) != markerSet.size()) {
    throw InvalidArgument("movement does not match the marker set");
  }
  const double scale = (movement.position(0, static_cast<Eigen::Index>(a)) -
                        movement.position(0, static_cast<Eigen::Index>(b)))
                           .norm();
  if (scale < 1e-9) {
    throw NumericalError(fmt::format(
        "degenerate pose in '{}': {}-{} distance {} at frame 0",
        movement.sourceId,
        markerSet.scalePair.first,
        markerSet.scalePair.second,
        scale));
  }
  Movement out = movement;
  out.frames /= scale;
  out.appliedScale = movement.appliedScale * scale;
  return out;
}

std::vector<Fold> kfoldSplit(const std::vector<std::string>& labels, size_t k, uint64_t seed) {
  const size_t n = labels.size();
  if (k < 2) {
    throw InvalidArgument("k-fold split needs k >= 2");
  }
  if (k > n) {
    throw InvalidArgument(fmt::format("k-fold split: k = {} exceeds N = {}", k, n));
  }
  // Group indices by label in order of first appearance, shuffle within each
  // label, then deal the concatenation round-robin into the folds.
  std::vector<std::string> order;
  std::map<std::string, std::vector<size_t>> byLabel;
  for (size_t i = 0; i < n; ++i) {
    if (!byLabel.count(labels[i])) {
      order.push_back(labels[i]);
    }
    byLabel[labels[i]].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<size_t> dealt;
  dealt.reserve(n);
  for (const auto& label : order) {
    auto& members = byLabel[label];
    std::shuffle(members.begin(), members.end(), rng);
    dealt.insert(dealt.end(), members.begin(), members.end());
  }
  std::vector<Fold> folds(k);
  for (size_t i = 0; i < n; ++i) {
    folds[i % k].test.push_back(dealt[i]);
  }
  for (auto& fold : folds) {
    std::sort(fold.test.begin(), fold.test.end());
    std::vector<bool> inTest(n, false);
    for (size_t i : fold.test) {
      inTest[i] = true;
    }
    for (size_t i = 0; i < n; ++i) {
      if (!inTest[i]) {
        fold.train.push_back(i);
      }
    }
  }
  return folds;
}

std::vector<Fold> kfoldSplit(const LabeledDataset& dataset, size_t k, uint64_t seed) {
  return kfoldSplit(dataset.labels(), k, seed);
}

} // namespace affectmod
