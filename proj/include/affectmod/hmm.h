#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace affectmod {

/// Fully-connected HMM with one full-covariance Gaussian output per state.
struct GaussianHmm {
  Eigen::MatrixXd transitions; // row-stochastic, N x N
  Eigen::VectorXd priors; // N
  Eigen::MatrixXd means; // N x d
  std::vector<Eigen::MatrixXd> covariances; // N of d x d

  [[nodiscard]] size_t numStates() const {
    return static_cast<size_t>(transitions.rows());
  }
  [[nodiscard]] Eigen::Index dim() const {
    return means.cols();
  }

  /// Throws InvalidArgument if shapes disagree, rows are not stochastic, or a
  /// covariance is not symmetric positive definite.
  void validate() const;

  /// T x N matrix of per-frame, per-state Gaussian log densities.
  [[nodiscard]] Eigen::MatrixXd emissionLogDensities(const Eigen::MatrixXd& sequence) const;
};

struct TrainReport {
  /// Total log-likelihood of the training set, one entry per evaluated model.
  std::vector<double> logLikelihoodPerIter;
  size_t iterations = 0;
  bool converged = false;
};

struct BaumWelchOptions {
  size_t maxIter = 200;
  /// Stop once the per-frame log-likelihood improves by less than this.
  double tolerance = 1e-6;
  double covarianceFloor = 1e-6;
};

/// Splits each sequence into `numStates` contiguous near-equal segments (extra
/// frames go to the earliest segments) and initializes state s from the pooled
/// frames of segment s. Transitions start uniform; priors are e_1.
GaussianHmm initSegmental(
    const std::vector<Eigen::MatrixXd>& sequences,
    size_t numStates,
    double covarianceFloor = 1e-6);

/// Multi-sequence EM in log space. Priors stay fixed; every covariance
/// M-step adds covarianceFloor * I.
std::pair<GaussianHmm, TrainReport> baumWelch(
    const std::vector<Eigen::MatrixXd>& sequences,
    const GaussianHmm& init,
    const BaumWelchOptions& options = {});

/// Exact forward-algorithm log-likelihood.
double logLikelihood(const GaussianHmm& model, const Eigen::MatrixXd& sequence);

/// Most likely state path; ties resolve toward the lower state index.
std::vector<size_t> viterbi(const GaussianHmm& model, const Eigen::MatrixXd& sequence);

/// Log joint probability of a given state path and the observations.
double pathLogProbability(
    const GaussianHmm& model,
    const Eigen::MatrixXd& sequence,
    const std::vector<size_t>& states);

struct SampledSequence {
  Eigen::MatrixXd observations; // T x d
  std::vector<size_t> states;
};

SampledSequence sampleSequence(const GaussianHmm& model, size_t length, std::mt19937_64& rng);

struct KlEstimate {
  double value = 0.0;
  double standardError = 0.0;
};

/// Monte-Carlo estimate of KL(a || b) from `numSamples` sequences of length
/// `horizon` drawn from `a`.
KlEstimate klDivergence(
    const GaussianHmm& a,
    const GaussianHmm& b,
    size_t numSamples,
    size_t horizon,
    uint64_t seed);

/// Symmetrized (KL(a||b) + KL(b||a)) / 2; both directions use the same seed,
/// so swapping the arguments gives the identical value.
double klDistance(
    const GaussianHmm& a,
    const GaussianHmm& b,
    size_t numSamples,
    size_t horizon,
    uint64_t seed);

} // namespace affectmod
