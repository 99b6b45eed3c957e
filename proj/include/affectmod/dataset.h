#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace affectmod {

/// Body-part roles used to group markers.
enum class BodyRole { Torso, Head, RightHand, LeftHand, RightFoot, LeftFoot };

inline constexpr std::array<BodyRole, 6> kAllRoles = {
    BodyRole::Torso,
    BodyRole::Head,
    BodyRole::RightHand,
    BodyRole::LeftHand,
    BodyRole::RightFoot,
    BodyRole::LeftFoot};

/// Manifest key of a role ("torso", "right_hand", ...).
std::string_view roleKey(BodyRole role);
/// Short name used in feature component names ("Torso", "RHand", ...).
std::string_view roleShortName(BodyRole role);
std::optional<BodyRole> roleFromKey(std::string_view key);

/// Marker names with role groupings, mass coefficients and the limb pair used
/// for scale normalization.
struct MarkerSet {
  std::vector<std::string> markers;
  std::map<BodyRole, std::vector<std::string>> groups;
  std::map<std::string, double> massCoefficients; // missing entries mean 1.0
  std::pair<std::string, std::string> scalePair{"right_shoulder", "right_wrist"};

  [[nodiscard]] size_t size() const {
    return markers.size();
  }

  /// Index of a marker name, or nullopt.
  [[nodiscard]] std::optional<size_t> find(std::string_view name) const;
  /// Index of a marker name; throws InvalidArgument when absent.
  [[nodiscard]] size_t index(std::string_view name) const;
  [[nodiscard]] std::vector<size_t> groupIndices(BodyRole role) const;
  [[nodiscard]] double mass(size_t markerIndex) const;

  /// Throws InvalidArgument if an invariant is violated.
  void validate() const;
};

/// A recorded trajectory: T frames of M marker positions.
///
/// `frames` is T x 3M with row t = (x0, y0, z0, x1, y1, z1, ...) in marker
/// order, which is also the HMM observation layout.
struct Movement {
  Eigen::MatrixXd frames;
  double frameRate = 120.0;
  std::optional<std::string> label;
  std::optional<std::string> subjectId;
  std::string sourceId;
  /// Product of all scale factors divided out by normalizeScale.
  double appliedScale = 1.0;

  [[nodiscard]] Eigen::Index numFrames() const {
    return frames.rows();
  }
  [[nodiscard]] Eigen::Index numMarkers() const {
    return frames.cols() / 3;
  }
  [[nodiscard]] Eigen::Vector3d position(Eigen::Index frame, Eigen::Index marker) const {
    return frames.block<1, 3>(frame, 3 * marker).transpose();
  }
  /// T x 3 trajectory of one marker.
  [[nodiscard]] Eigen::MatrixXd markerTrajectory(Eigen::Index marker) const {
    return frames.middleCols(3 * marker, 3);
  }
  /// T x 3 trajectory of the centroid of a set of markers.
  [[nodiscard]] Eigen::MatrixXd centroidTrajectory(const std::vector<size_t>& markers) const;

  /// Throws InvalidArgument unless T >= 2, coordinates are finite and the frame
  /// rate is positive. A non-zero `expectedMarkers` also checks M.
  void validate(size_t expectedMarkers = 0) const;
};

struct LabeledDataset {
  MarkerSet markerSet;
  std::vector<Movement> movements;
  std::vector<std::string> labelSet;

  [[nodiscard]] size_t size() const {
    return movements.size();
  }
  [[nodiscard]] std::optional<size_t> labelIndex(std::string_view label) const;
  [[nodiscard]] std::optional<size_t> findMovement(std::string_view sourceId) const;
  [[nodiscard]] std::vector<std::string> labels() const;

  void validate() const;
};

/// Parses a trajectory CSV (`frame,<m>_x,<m>_y,<m>_z,...`). The header row is
/// optional; a leading `# frame_rate=<Hz>` comment overrides `frameRate`.
Movement parseTrajectoryCsv(
    std::string_view text,
    const MarkerSet& markerSet,
    double frameRate,
    std::string sourceId = {});

/// Inverse of parseTrajectoryCsv, including the frame rate comment; doubles are
/// written in shortest round-trip form.
std::string serializeTrajectoryCsv(const Movement& movement, const MarkerSet& markerSet);

/// Parses the JSON manifest text. `baseDir` resolves relative movement paths.
LabeledDataset loadDatasetFromManifest(
    std::string_view manifestJson,
    const std::filesystem::path& baseDir);

/// Loads a manifest file and every trajectory it references.
LabeledDataset loadDataset(const std::filesystem::path& manifestPath);

/// Writes `dataset` as a manifest plus one CSV per movement into `dir`.
void writeDataset(const LabeledDataset& dataset, const std::filesystem::path& dir);

/// Linear re-interpolation onto a uniform grid at `targetRate`.
Movement resample(const Movement& movement, double targetRate);

/// Divides all coordinates by the frame-0 distance between the scale pair markers.
Movement normalizeScale(const Movement& movement, const MarkerSet& markerSet);

struct Fold {
  std::vector<size_t> train;
  std::vector<size_t> test;
};

/// Stratified k-fold split over movement labels; deterministic given the seed.
std::vector<Fold> kfoldSplit(const std::vector<std::string>& labels, size_t k, uint64_t seed);
std::vector<Fold> kfoldSplit(const LabeledDataset& dataset, size_t k, uint64_t seed);

/// Reads a whole file; throws LoadError naming the path on failure.
std::string readFile(const std::filesystem::path& path);
/// Writes a whole file; throws Error naming the path on failure.
void writeFile(const std::filesystem::path& path, std::string_view contents);

} // namespace affectmod
