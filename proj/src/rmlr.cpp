#include "affectmod/rmlr.h"

#include "affectmod/dataset.h"
#include "affectmod/errors.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace affectmod {

namespace {

constexpr double kMinWeight = 1e-5;
constexpr double kConstantFeatureScale = 1e-12;
constexpr size_t kMaxInnerSweeps = 100;

// Scores computed through the softmax carry rounding that would otherwise
// leave 1e-16 coefficients alive exactly at lambda max.
constexpr double kThresholdSlack = 1e-10;

double softThreshold(double value, double threshold) {
  if (std::abs(value) <= threshold * (1.0 + kThresholdSlack)) {
    return 0.0;
  }
  return value > 0.0 ? value - threshold : value + threshold;
}

struct Standardized {
  Eigen::MatrixXd data;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  std::vector<bool> constant;
};

Standardized standardizeColumns(const Eigen::MatrixXd& x) {
  Standardized s;
  const auto n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean().transpose();
  s.scale.resize(x.cols());
  s.data.resize(x.rows(), x.cols());
  s.constant.assign(static_cast<size_t>(x.cols()), false);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Eigen::VectorXd centered = x.col(j).array() - s.mean(j);
    const double sd = std::sqrt(centered.squaredNorm() / n);
    if (sd < kConstantFeatureScale * std::max(1.0, std::abs(s.mean(j)))) {
      s.scale(j) = 1.0;
      s.data.col(j).setZero();
      s.constant[static_cast<size_t>(j)] = true;
    } else {
      s.scale(j) = sd;
      s.data.col(j) = centered / sd;
    }
  }
  return s;
}

// Row-wise log-softmax of eta (N x K).
Eigen::MatrixXd logSoftmaxRows(const Eigen::MatrixXd& eta) {
  Eigen::MatrixXd out(eta.rows(), eta.cols());
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    const double m = eta.row(i).maxCoeff();
    const double lse = m + std::log((eta.row(i).array() - m).exp().sum());
    out.row(i) = eta.row(i).array() - lse;
  }
  return out;
}

Eigen::MatrixXd linearScores(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& z) {
  // eta = [1 z] theta^T
  Eigen::MatrixXd eta = z * theta.rightCols(theta.cols() - 1).transpose();
  eta.rowwise() += theta.col(0).transpose();
  return eta;
}

double logLikelihood(
    const Eigen::MatrixXd& theta,
    const Eigen::MatrixXd& z,
    const std::vector<size_t>& classes) {
  const Eigen::MatrixXd logp = logSoftmaxRows(linearScores(theta, z));
  double ll = 0.0;
  for (size_t i = 0; i < classes.size(); ++i) {
    ll += logp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(classes[i]));
  }
  return ll;
}

std::vector<size_t> encodeLabels(
    const std::vector<std::string>& labels,
    std::vector<std::string>& labelOrder) {
  if (labelOrder.empty()) {
    labelOrder = labels;
    std::sort(labelOrder.begin(), labelOrder.end());
    labelOrder.erase(std::unique(labelOrder.begin(), labelOrder.end()), labelOrder.end());
  }
  std::vector<size_t> classes;
  classes.reserve(labels.size());
  for (const auto& label : labels) {
    const auto it = std::find(labelOrder.begin(), labelOrder.end(), label);
    if (it == labelOrder.end()) {
      throw InvalidArgument(fmt::format("label '{}' is not in the label order", label));
    }
    classes.push_back(static_cast<size_t>(it - labelOrder.begin()));
  }
  return classes;
}

Eigen::MatrixXd initialTheta(const std::vector<size_t>& classes, size_t numClasses, Eigen::Index p) {
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(numClasses), p + 1);
  std::vector<double> counts(numClasses, 0.0);
  for (size_t c : classes) {
    counts[c] += 1.0;
  }
  double meanLog = 0.0;
  for (size_t k = 0; k < numClasses; ++k) {
    theta(static_cast<Eigen::Index>(k), 0) = std::log(counts[k] / static_cast<double>(classes.size()));
    meanLog += theta(static_cast<Eigen::Index>(k), 0);
  }
  theta.col(0).array() -= meanLog / static_cast<double>(numClasses);
  return theta;
}

struct CoreResult {
  Eigen::MatrixXd theta;
  double objective = 0.0;
  size_t updates = 0;
  bool converged = false;
};

CoreResult fitCore(
    const Eigen::MatrixXd& z,
    const std::vector<size_t>& classes,
    const std::vector<bool>& constant,
    double alpha,
    double lambda,
    Eigen::MatrixXd theta,
    const RmlrFitOptions& options) {
  const Eigen::Index n = z.rows();
  const Eigen::Index p = z.cols();
  const auto numClasses = theta.rows();
  const size_t maxUpdates = options.maxUpdates > 0
      ? options.maxUpdates
      : 10 * static_cast<size_t>(std::max<Eigen::Index>(p, 1)) * static_cast<size_t>(numClasses) * 1000;
  const double l1 = lambda * alpha;
  const double l2 = 2.0 * lambda * (1.0 - alpha);

  CoreResult result;
  double objective = rmlrObjective(theta, z, classes, alpha, lambda);
  Eigen::VectorXd w(n);
  Eigen::VectorXd r(n);
  Eigen::VectorXd sumSq(p);

  while (result.updates < maxUpdates) {
    double maxChange = 0.0;
    for (Eigen::Index k = 0; k < numClasses && result.updates < maxUpdates; ++k) {
      const Eigen::MatrixXd eta = linearScores(theta, z);
      const Eigen::MatrixXd logp = logSoftmaxRows(eta);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double prob = std::exp(logp(i, k));
        const double target = classes[static_cast<size_t>(i)] == static_cast<size_t>(k) ? 1.0 : 0.0;
        w(i) = std::max(prob * (1.0 - prob), kMinWeight);
        r(i) = (target - prob) / w(i);
      }
      const double sumW = w.sum();
      for (Eigen::Index j = 0; j < p; ++j) {
        sumSq(j) = (w.array() * z.col(j).array().square()).sum();
      }

      const Eigen::RowVectorXd previous = theta.row(k);
      Eigen::RowVectorXd beta = previous;
      for (size_t sweep = 0; sweep < kMaxInnerSweeps && result.updates < maxUpdates; ++sweep) {
        double sweepChange = 0.0;
        const double shift = w.dot(r) / sumW;
        beta(0) += shift;
        r.array() -= shift;
        sweepChange = std::abs(shift);
        for (Eigen::Index j = 0; j < p; ++j) {
          if (constant[static_cast<size_t>(j)] || sumSq(j) + l2 <= 0.0) {
            continue;
          }
          const double old = beta(j + 1);
          const double u = (w.array() * z.col(j).array() * r.array()).sum() + old * sumSq(j);
          const double updated = softThreshold(u, l1) / (sumSq(j) + l2);
          if (updated != old) {
            r -= (updated - old) * z.col(j);
            beta(j + 1) = updated;
            sweepChange = std::max(sweepChange, std::abs(updated - old));
          }
        }
        result.updates += static_cast<size_t>(p) + 1;
        if (sweepChange < options.tolerance) {
          break;
        }
      }

      // Backtrack along the proposed step until the true objective improves.
      const Eigen::RowVectorXd step = beta - previous;
      double t = 1.0;
      double candidate = objective;
      bool accepted = false;
      for (int attempt = 0; attempt < 40; ++attempt) {
        theta.row(k) = previous + t * step;
        candidate = rmlrObjective(theta, z, classes, alpha, lambda);
        if (candidate >= objective - 1e-13 * (1.0 + std::abs(objective))) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) {
        theta.row(k) = previous;
        continue;
      }
      objective = candidate;
      maxChange = std::max(maxChange, (t * step).cwiseAbs().maxCoeff());
    }
    if (maxChange < options.tolerance) {
      result.converged = true;
      break;
    }
  }

  // Intercepts are only identified up to a common shift.
  theta.col(0).array() -= theta.col(0).mean();
  result.theta = std::move(theta);
  result.objective = rmlrObjective(result.theta, z, classes, alpha, lambda);
  return result;
}

void checkFitInputs(
    const Eigen::MatrixXd& features,
    const std::vector<std::string>& labels,
    const std::vector<std::string>& featureNames,
    double alpha,
    double lambda) {
  if (static_cast<size_t>(features.rows()) != labels.size()) {
    throw InvalidArgument("feature rows and labels differ in length");
  }
  if (static_cast<size_t>(features.cols()) != featureNames.size()) {
    throw InvalidArgument("feature columns and names differ in length");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidArgument(fmt::format("alpha must lie in [0, 1], got {}", alpha));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument(fmt::format("lambda must be non-negative, got {}", lambda));
  }
  if (!features.allFinite()) {
    throw InvalidArgument("features contain non-finite values");
  }
}

void checkClasses(const std::vector<size_t>& classes, const std::vector<std::string>& labelOrder) {
  if (labelOrder.size() < 2) {
    throw InvalidArgument("need at least two classes");
  }
  std::vector<size_t> counts(labelOrder.size(), 0);
  for (size_t c : classes) {
    ++counts[c];
  }
  for (size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) {
      throw InvalidArgument(fmt::format("class '{}' has no samples", labelOrder[k]));
    }
  }
  if (classes.size() < labelOrder.size()) {
    throw InvalidArgument("need at least as many samples as classes");
  }
}

RmlrModel makeModel(
    const Standardized& s,
    const std::vector<std::string>& labelOrder,
    const std::vector<std::string>& featureNames,
    double alpha,
    double lambda,
    const CoreResult& core) {
  RmlrModel model;
  model.theta = core.theta;
  model.labelOrder = labelOrder;
  model.featureOrder = featureNames;
  model.mean = s.mean;
  model.scale = s.scale;
  model.fit.alpha = alpha;
  model.fit.lambda = lambda;
  model.fit.objective = core.objective;
  model.fit.iterations = core.updates;
  model.fit.converged = core.converged;
  return model;
}

} // namespace

size_t RmlrModel::classIndex(std::string_view label) const {
  const auto it = std::find(labelOrder.begin(), labelOrder.end(), label);
  if (it == labelOrder.end()) {
    throw InvalidArgument(fmt::format("unknown class '{}'", label));
  }
  return static_cast<size_t>(it - labelOrder.begin());
}

Eigen::VectorXd RmlrModel::standardize(const Eigen::VectorXd& x) const {
  if (x.size() != mean.size()) {
    throw InvalidArgument(fmt::format(
        "dimension mismatch: model expects {} features, got {}", mean.size(), x.size()));
  }
  return (x - mean).cwiseQuotient(scale);
}

Eigen::VectorXd softmaxScores(const Eigen::MatrixXd& theta, const Eigen::VectorXd& z) {
  if (theta.cols() != z.size() + 1) {
    throw InvalidArgument(fmt::format(
        "dimension mismatch: theta has {} columns, input has {} features", theta.cols(), z.size()));
  }
  Eigen::VectorXd scores = theta.col(0) + theta.rightCols(theta.cols() - 1) * z;
  scores.array() -= scores.maxCoeff();
  scores = scores.array().exp();
  return scores / scores.sum();
}

Eigen::VectorXd RmlrModel::predictProba(const Eigen::VectorXd& x) const {
  if (!x.allFinite()) {
    throw InvalidArgument("non-finite input");
  }
  return softmaxScores(theta, standardize(x));
}

const std::string& RmlrModel::predict(const Eigen::VectorXd& x) const {
  Eigen::Index best = 0;
  predictProba(x).maxCoeff(&best);
  return labelOrder[static_cast<size_t>(best)];
}

void RmlrModel::validate() const {
  const auto k = static_cast<Eigen::Index>(labelOrder.size());
  const auto p = static_cast<Eigen::Index>(featureOrder.size());
  if (k < 2) {
    throw InvalidArgument("model needs at least two classes");
  }
  if (theta.rows() != k || theta.cols() != p + 1 || mean.size() != p || scale.size() != p) {
    throw InvalidArgument("model dimensions are inconsistent");
  }
  if (!theta.allFinite() || !mean.allFinite() || !scale.allFinite()) {
    throw InvalidArgument("model contains non-finite entries");
  }
  if ((scale.array() <= 0.0).any()) {
    throw InvalidArgument("model standardization scale must be positive");
  }
}

double rmlrObjective(
    const Eigen::MatrixXd& theta,
    const Eigen::MatrixXd& standardized,
    const std::vector<size_t>& classes,
    double alpha,
    double lambda) {
  const auto beta = theta.rightCols(theta.cols() - 1);
  const double penalty =
      lambda * (alpha * beta.cwiseAbs().sum() + (1.0 - alpha) * beta.squaredNorm());
  return logLikelihood(theta, standardized, classes) - penalty;
}

double rmlrSmoothObjective(
    const Eigen::MatrixXd& theta,
    const Eigen::MatrixXd& standardized,
    const std::vector<size_t>& classes,
    double alpha,
    double lambda) {
  const auto beta = theta.rightCols(theta.cols() - 1);
  return logLikelihood(theta, standardized, classes) - lambda * (1.0 - alpha) * beta.squaredNorm();
}

Eigen::MatrixXd rmlrSmoothGradient(
    const Eigen::MatrixXd& theta,
    const Eigen::MatrixXd& standardized,
    const std::vector<size_t>& classes,
    double alpha,
    double lambda) {
  const Eigen::MatrixXd prob = logSoftmaxRows(linearScores(theta, standardized)).array().exp();
  Eigen::MatrixXd residual = -prob; // N x K: y - p
  for (size_t i = 0; i < classes.size(); ++i) {
    residual(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(classes[i])) += 1.0;
  }
  Eigen::MatrixXd grad(theta.rows(), theta.cols());
  grad.col(0) = residual.colwise().sum().transpose();
  grad.rightCols(theta.cols() - 1) = residual.transpose() * standardized;
  grad.rightCols(theta.cols() - 1) -= 2.0 * lambda * (1.0 - alpha) * theta.rightCols(theta.cols() - 1);
  return grad;
}

double rmlrLambdaMax(
    const Eigen::MatrixXd& standardized,
    const std::vector<size_t>& classes,
    size_t numClasses,
    double alpha) {
  const auto n = static_cast<double>(classes.size());
  Eigen::MatrixXd residual =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes.size()), static_cast<Eigen::Index>(numClasses));
  std::vector<double> prior(numClasses, 0.0);
  for (size_t c : classes) {
    prior[c] += 1.0 / n;
  }
  for (size_t i = 0; i < classes.size(); ++i) {
    for (size_t k = 0; k < numClasses; ++k) {
      residual(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          (classes[i] == k ? 1.0 : 0.0) - prior[k];
    }
  }
  const double g = (standardized.transpose() * residual).cwiseAbs().maxCoeff();
  return g / std::max(alpha, 1e-3);
}

std::vector<double> lambdaGrid(double lambdaMax, size_t count) {
  if (count == 0) {
    throw InvalidArgument("lambda grid needs at least one value");
  }
  if (!(lambdaMax > 0.0)) {
    lambdaMax = 1e-8;
  }
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lambdaMax;
    return grid;
  }
  const double logMax = std::log(lambdaMax);
  const double logMin = std::log(lambdaMax * 1e-4);
  for (size_t i = 0; i < count; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(count - 1);
    grid[i] = std::exp(logMax + f * (logMin - logMax));
  }
  grid.front() = lambdaMax;
  return grid;
}

RmlrModel fitRmlr(
    const Eigen::MatrixXd& features,
    const std::vector<std::string>& labels,
    const std::vector<std::string>& featureNames,
    double alpha,
    double lambda,
    const RmlrFitOptions& options,
    const std::vector<std::string>& labelOrder) {
  checkFitInputs(features, labels, featureNames, alpha, lambda);
  auto order = labelOrder;
  const auto classes = encodeLabels(labels, order);
  checkClasses(classes, order);
  const auto s = standardizeColumns(features);
  const auto core = fitCore(
      s.data,
      classes,
      s.constant,
      alpha,
      lambda,
      initialTheta(classes, order.size(), features.cols()),
      options);
  return makeModel(s, order, featureNames, alpha, lambda, core);
}

std::vector<RmlrModel> fitRmlrPath(
    const Eigen::MatrixXd& features,
    const std::vector<std::string>& labels,
    const std::vector<std::string>& featureNames,
    double alpha,
    const std::vector<double>& lambdas,
    const RmlrFitOptions& options,
    const std::vector<std::string>& labelOrder) {
  checkFitInputs(features, labels, featureNames, alpha, 0.0);
  auto order = labelOrder;
  const auto classes = encodeLabels(labels, order);
  checkClasses(classes, order);
  const auto s = standardizeColumns(features);
  Eigen::MatrixXd theta = initialTheta(classes, order.size(), features.cols());
  std::vector<RmlrModel> models;
  models.reserve(lambdas.size());
  for (double lambda : lambdas) {
    auto core = fitCore(s.data, classes, s.constant, alpha, lambda, theta, options);
    theta = core.theta;
    models.push_back(makeModel(s, order, featureNames, alpha, lambda, core));
  }
  return models;
}

std::vector<double> defaultAlphaGrid() {
  std::vector<double> grid;
  for (int i = 1; i <= 20; ++i) {
    grid.push_back(0.05 * i);
  }
  return grid;
}

RegPath crossValidateRmlr(
    const Eigen::MatrixXd& features,
    const std::vector<std::string>& labels,
    const std::vector<double>& alphaGrid,
    size_t numLambda,
    size_t folds,
    uint64_t seed,
    const RmlrFitOptions& options) {
  if (alphaGrid.empty() || numLambda == 0) {
    throw InvalidArgument("cross-validation grids must be non-empty");
  }
  std::vector<std::string> labelOrder;
  const auto classes = encodeLabels(labels, labelOrder);
  checkClasses(classes, labelOrder);
  std::vector<std::string> names(static_cast<size_t>(features.cols()));
  for (size_t j = 0; j < names.size(); ++j) {
    names[j] = fmt::format("f{}", j);
  }

  RegPath path;
  path.alphaGrid = alphaGrid;
  const size_t n = labels.size();
  std::map<std::string, size_t> counts;
  for (const auto& label : labels) {
    ++counts[label];
  }
  size_t k = folds;
  for (const auto& [label, count] : counts) {
    if (count < folds) {
      path.warnings.push_back(fmt::format(
          "class '{}' has {} members (< {} folds); using leave-one-out", label, count, folds));
      k = n;
      break;
    }
  }
  k = std::min(k, n);
  path.folds = k;
  const auto split = kfoldSplit(labels, k, seed);

  const auto full = standardizeColumns(features);
  for (double alpha : alphaGrid) {
    path.lambdaGrids.push_back(
        lambdaGrid(rmlrLambdaMax(full.data, classes, labelOrder.size(), alpha), numLambda));
  }
  path.cvErrors = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(alphaGrid.size()), static_cast<Eigen::Index>(numLambda));

  for (const auto& fold : split) {
    Eigen::MatrixXd trainX(static_cast<Eigen::Index>(fold.train.size()), features.cols());
    std::vector<std::string> trainY;
    for (size_t i = 0; i < fold.train.size(); ++i) {
      trainX.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(fold.train[i]));
      trainY.push_back(labels[fold.train[i]]);
    }
    // A training fold may lack a class entirely under leave-one-out with
    // singleton classes; such classes simply cannot be predicted.
    std::vector<std::string> foldOrder;
    encodeLabels(trainY, foldOrder);
    if (foldOrder.size() < 2) {
      continue;
    }
    for (size_t a = 0; a < alphaGrid.size(); ++a) {
      const auto models = fitRmlrPath(
          trainX, trainY, names, alphaGrid[a], path.lambdaGrids[a], options, foldOrder);
      for (size_t l = 0; l < models.size(); ++l) {
        size_t wrong = 0;
        for (size_t i : fold.test) {
          const Eigen::VectorXd x = features.row(static_cast<Eigen::Index>(i)).transpose();
          if (models[l].predict(x) != labels[i]) {
            ++wrong;
          }
        }
        path.cvErrors(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(l)) +=
            static_cast<double>(wrong);
      }
    }
  }
  path.cvErrors /= static_cast<double>(n);

  // Minimum error; ties go to the largest lambda, then the largest alpha.
  double bestError = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < alphaGrid.size(); ++a) {
    for (size_t l = 0; l < numLambda; ++l) {
      const double err = path.cvErrors(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(l));
      const double lambda = path.lambdaGrids[a][l];
      const bool better = err < bestError ||
          (err == bestError &&
           (lambda > path.bestLambda || (lambda == path.bestLambda && alphaGrid[a] > path.bestAlpha)));
      if (better) {
        bestError = err;
        path.bestAlphaIndex = a;
        path.bestLambdaIndex = l;
        path.bestAlpha = alphaGrid[a];
        path.bestLambda = lambda;
      }
    }
  }
  return path;
}

std::string regPathCsv(const RegPath& path) {
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "alpha,lambda,cv_error\n");
  for (size_t a = 0; a < path.alphaGrid.size(); ++a) {
    for (size_t l = 0; l < path.lambdaGrids[a].size(); ++l) {
      fmt::format_to(
          std::back_inserter(out),
          "{},{},{}\n",
          path.alphaGrid[a],
          path.lambdaGrids[a][l],
          path.cvErrors(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(l)));
    }
  }
  return fmt::to_string(out);
}

std::vector<std::string> salientComponents(const RmlrModel& model, std::string_view label, double tol) {
  const auto k = static_cast<Eigen::Index>(model.classIndex(label));
  std::vector<std::string> out;
  for (size_t j = 0; j < model.featureOrder.size(); ++j) {
    if (std::abs(model.theta(k, static_cast<Eigen::Index>(j) + 1)) > tol) {
      out.push_back(model.featureOrder[j]);
    }
  }
  return out;
}

std::vector<std::string> discriminativeComponents(
    const RmlrModel& model,
    std::string_view classA,
    std::string_view classB,
    double tol) {
  const auto a = static_cast<Eigen::Index>(model.classIndex(classA));
  const auto b = static_cast<Eigen::Index>(model.classIndex(classB));
  std::vector<std::string> out;
  for (size_t j = 0; j < model.featureOrder.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j) + 1;
    if (std::abs(model.theta(a, c)) > tol || std::abs(model.theta(b, c)) > tol) {
      out.push_back(model.featureOrder[j]);
    }
  }
  return out;
}

std::vector<std::string> nondiscriminativeSet(
    const std::vector<std::string>& all,
    const std::vector<std::string>& a,
    const std::vector<std::string>& b) {
  std::vector<std::string> out;
  for (const auto& name : all) {
    const bool inA = std::find(a.begin(), a.end(), name) != a.end();
    const bool inB = std::find(b.begin(), b.end(), name) != b.end();
    if (!(inA && inB)) {
      out.push_back(name);
    }
  }
  return out;
}

} // namespace affectmod
