#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace affectmod {

/// Elastic-net regularized multinomial logistic regression.
///
/// theta is K x (p+1); column 0 holds the intercepts. Coefficients live in the
/// standardized feature space: x_std = (x - mean) / scale.
struct RmlrModel {
  Eigen::MatrixXd theta;
  std::vector<std::string> labelOrder;
  std::vector<std::string> featureOrder;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  struct FitInfo {
    double alpha = 0.0;
    double lambda = 0.0;
    double objective = 0.0;
    size_t iterations = 0; // coordinate updates
    bool converged = false;
  } fit;

  [[nodiscard]] size_t numClasses() const {
    return labelOrder.size();
  }
  [[nodiscard]] size_t numFeatures() const {
    return featureOrder.size();
  }
  [[nodiscard]] size_t classIndex(std::string_view label) const;
  [[nodiscard]] Eigen::VectorXd standardize(const Eigen::VectorXd& x) const;
  /// Softmax class probabilities in labelOrder.
  [[nodiscard]] Eigen::VectorXd predictProba(const Eigen::VectorXd& x) const;
  [[nodiscard]] const std::string& predict(const Eigen::VectorXd& x) const;

  void validate() const;
};

/// Numerically stable softmax over theta * [1; z] for a standardized z.
Eigen::VectorXd softmaxScores(const Eigen::MatrixXd& theta, const Eigen::VectorXd& z);

struct RmlrFitOptions {
  double tolerance = 1e-7;
  /// 0 means 10 * p * K * 1000 coordinate updates.
  size_t maxUpdates = 0;
};

/// Fits the penalized model
///   max sum_i log P(y_i | x_i) - lambda * sum_kj (alpha |b_kj| + (1 - alpha) b_kj^2)
/// by cyclic coordinate descent on per-class quadratic approximations with
/// soft-thresholding. Intercepts are unpenalized; features are standardized
/// internally (constant features keep a zero coefficient).
RmlrModel fitRmlr(
    const Eigen::MatrixXd& features,
    const std::vector<std::string>& labels,
    const std::vector<std::string>& featureNames,
    double alpha,
    double lambda,
    const RmlrFitOptions& options = {},
    const std::vector<std::string>& labelOrder = {});

/// Penalized objective of `theta` on already standardized features.
double rmlrObjective(
    const Eigen::MatrixXd& theta,
    const Eigen::MatrixXd& standardized,
    const std::vector<size_t>& classes,
    double alpha,
    double lambda);

/// Smooth part of the objective (log-likelihood minus the ridge term) and its
/// analytic gradient with respect to theta.
double rmlrSmoothObjective(
    const Eigen::MatrixXd& theta,
    const Eigen::MatrixXd& standardized,
    const std::vector<size_t>& classes,
    double alpha,
    double lambda);
Eigen::MatrixXd rmlrSmoothGradient(
    const Eigen::MatrixXd& theta,
    const Eigen::MatrixXd& standardized,
    const std::vector<size_t>& classes,
    double alpha,
    double lambda);

/// Smallest lambda at which every non-intercept coefficient is zero.
double rmlrLambdaMax(
    const Eigen::MatrixXd& standardized,
    const std::vector<size_t>& classes,
    size_t numClasses,
    double alpha);

/// `count` log-spaced values from lambdaMax down to lambdaMax * 1e-4.
std::vector<double> lambdaGrid(double lambdaMax, size_t count);

/// Fits a descending lambda path with warm starts (one model per lambda).
std::vector<RmlrModel> fitRmlrPath(
    const Eigen::MatrixXd& features,
    const std::vector<std::string>& labels,
    const std::vector<std::string>& featureNames,
    double alpha,
    const std::vector<double>& lambdas,
    const RmlrFitOptions& options = {},
    const std::vector<std::string>& labelOrder = {});

struct RegPath {
  std::vector<double> alphaGrid;
  /// One descending lambda grid per alpha.
  std::vector<std::vector<double>> lambdaGrids;
  /// alpha x lambda misclassification rates.
  Eigen::MatrixXd cvErrors;
  size_t bestAlphaIndex = 0;
  size_t bestLambdaIndex = 0;
  double bestAlpha = 0.0;
  double bestLambda = 0.0;
  size_t folds = 0;
  std::vector<std::string> warnings;
};

/// The default mixing grid 0.05, 0.10, ..., 1.0.
std::vector<double> defaultAlphaGrid();

/// Two-dimensional (alpha, lambda) stratified k-fold cross-validation.
/// Ties prefer the largest lambda, then the largest alpha.
RegPath crossValidateRmlr(
    const Eigen::MatrixXd& features,
    const std::vector<std::string>& labels,
    const std::vector<double>& alphaGrid,
    size_t numLambda,
    size_t folds,
    uint64_t seed,
    const RmlrFitOptions& options = {});

/// CSV with columns alpha,lambda,cv_error.
std::string regPathCsv(const RegPath& path);

/// Components with a non-zero coefficient for `label` (intercept excluded).
std::vector<std::string>
salientComponents(const RmlrModel& model, std::string_view label, double tol = 1e-8);

/// Components with a non-zero coefficient for either class.
std::vector<std::string> discriminativeComponents(
    const RmlrModel& model,
    std::string_view classA,
    std::string_view classB,
    double tol = 1e-8);

/// all \ (a intersect b), in the order of `all`.
std::vector<std::string> nondiscriminativeSet(
    const std::vector<std::string>& all,
    const std::vector<std::string>& a,
    const std::vector<std::string>& b);

} // namespace affectmod
