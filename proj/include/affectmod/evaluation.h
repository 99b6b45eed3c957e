#pragma once

#include "affectmod/generation.h"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace affectmod {

struct ConfusionMatrix {
  std::vector<std::string> labels;
  /// counts(i, j): items whose true (target) label is i and that were
  /// recognized as j.
  Eigen::MatrixXi counts;

  [[nodiscard]] Eigen::MatrixXd rowPercent() const;
  [[nodiscard]] double accuracy() const;
  [[nodiscard]] size_t total() const;
  /// Header "target,<labels...>" then one row of counts per label.
  [[nodiscard]] std::string csv() const;
};

ConfusionMatrix confusionMatrix(
    const std::vector<std::string>& trueLabels,
    const std::vector<std::string>& predictedLabels,
    const std::vector<std::string>& labelOrder);

struct ClusteringResult {
  std::vector<size_t> assignments;
  Eigen::MatrixXd centers; // k x p
  size_t k = 0;
  double wcss = 0.0;
  /// WCSS after every Lloyd iteration of the winning restart.
  std::vector<double> wcssHistory;
  double goc = 0.0;
};

/// k-means++ seeding followed by Lloyd iterations, best of `restarts` by
/// within-cluster sum of squares.
ClusteringResult kmeans(const Eigen::MatrixXd& points, size_t k, uint64_t seed, size_t restarts = 10);

/// Ratio of weighted between-cluster to within-cluster mean pairwise
/// distances. Needs at least two non-empty clusters.
double goodnessOfClustering(const Eigen::MatrixXd& points, const std::vector<size_t>& assignments);

struct ExemplarSelection {
  size_t index = 0;
  size_t k = 0;
  double goc = 0.0;
  bool medoid = false;
  std::vector<std::string> warnings;
};

/// Picks the item closest to the center of the most populous cluster, using
/// the k in kRange with the highest goodness of clustering. Fewer than five
/// items fall back to the medoid.
ExemplarSelection selectExemplar(
    const Eigen::MatrixXd& features,
    uint64_t seed,
    const std::vector<size_t>& kRange = {2, 3, 4, 5});

/// k-nearest-neighbor labels in the space standardized on the training rows.
std::vector<std::string> knnClassify(
    const Eigen::MatrixXd& trainFeatures,
    const std::vector<std::string>& trainLabels,
    const Eigen::MatrixXd& testFeatures,
    size_t k = 1);

struct EvaluationOptions {
  size_t folds = 10;
  uint64_t seed = 0;
  /// Also convert each movement to its own emotion.
  bool selfConvert = false;
  double alpha = 1.0;
  double lambda = 0.0;
  GenerationConfig generation;
};

struct ConversionRecord {
  size_t fold = 0;
  std::string sourceId;
  std::string original;
  std::string target;
  std::string recognized; // empty when skipped
  bool skipped = false;
  double outputDistance = 0.0;
  size_t neighborCount = 0;
  std::string note;
  Eigen::VectorXd outputFeatures;
};

struct ExemplarRecord {
  std::string original;
  std::string target;
  std::string sourceId;
  size_t k = 0;
  double goc = 0.0;
  bool medoid = false;
};

struct EvaluationReport {
  std::vector<ConversionRecord> conversions;
  /// Conversions to a different emotion.
  ConfusionMatrix confusion;
  /// Conversions to the original emotion (empty unless selfConvert).
  ConfusionMatrix selfConfusion;
  double targetAccuracy = 0.0;
  double selfAccuracy = 0.0;
  std::vector<ExemplarRecord> exemplars;
  std::vector<std::string> warnings;

  [[nodiscard]] size_t attempted() const {
    return conversions.size();
  }
  [[nodiscard]] std::string conversionsCsv() const;
  [[nodiscard]] std::string summaryCsv() const;
};

/// Fold-wise protocol: for every fold the RMLR model is refit on the training
/// part with the given (alpha, lambda), each test movement is converted to
/// the other emotions, and the output is recognized by kNN over the training
/// features.
EvaluationReport evaluateConversions(const PreparedDataset& prepared, const EvaluationOptions& options);

enum class SearchMethod { LmaSubspace, HmmKl, HmmRmlr };

std::string_view searchMethodName(SearchMethod method);
SearchMethod searchMethodFromName(std::string_view name);

struct SearchQuery {
  size_t index = 0;
  std::string target;
};

struct BenchmarkOptions {
  std::vector<SearchMethod> methods = {SearchMethod::LmaSubspace, SearchMethod::HmmKl, SearchMethod::HmmRmlr};
  size_t numStates = 6;
  size_t klSamples = 10;
  /// 0 uses the query length.
  size_t klHorizon = 0;
  uint64_t seed = 0;
  BaumWelchOptions training;
  /// Mixing weight of the parameter-space RMLR fit; lambda is
  /// lambdaFraction times the smallest all-zero lambda.
  double alpha = 1.0;
  double lambdaFraction = 0.1;
};

struct MethodTiming {
  SearchMethod method = SearchMethod::LmaSubspace;
  std::vector<double> seconds; // per query
  double meanSeconds = 0.0;
  double sdSeconds = 0.0;
  std::vector<size_t> retrieved; // top-1 dataset index per query
};

/// Cached per-movement HMMs plus the parameter-space classifier used by the
/// HMM based searches.
struct HmmSearchCache {
  std::vector<GaussianHmm> models;
  Eigen::MatrixXd parameters; // flattened, one row per movement
  RmlrModel parameterModel;
};

HmmSearchCache buildHmmSearchCache(const PreparedDataset& prepared, const BenchmarkOptions& options);

/// Flattened means, covariance diagonals and transitions.
Eigen::VectorXd flattenHmm(const GaussianHmm& hmm);

/// Times a nearest-neighbor retrieval in the target class for every query,
/// excluding the query itself from the candidates. Query time includes
/// building the query's representation.
std::vector<MethodTiming> benchmarkNnSearch(
    const PreparedDataset& prepared,
    const RmlrModel& model,
    const std::vector<SearchQuery>& queries,
    const BenchmarkOptions& options,
    const HmmSearchCache* cache);

/// method,mean_seconds,sd_seconds,queries (wall-clock, varies between runs).
std::string benchmarkTimingCsv(const std::vector<MethodTiming>& timings);
/// query,source_id,target,<method...> with the retrieved source ids.
std::string benchmarkRetrievalCsv(
    const PreparedDataset& prepared,
    const std::vector<MethodTiming>& timings,
    const std::vector<SearchQuery>& queries);

} // namespace affectmod
