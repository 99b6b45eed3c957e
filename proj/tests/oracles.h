#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library's numerical code paths.

#include "affectmod/dataset.h"
#include "affectmod/filter.h"
#include "affectmod/hmm.h"

#include <Eigen/Core>

#include <functional>
#include <random>
#include <vector>

namespace oracle {

/// Full-covariance Gaussian log density through an LU factorization.
double gaussianLogDensity(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

struct PathEnumeration {
  double logLikelihood = 0.0;
  std::vector<size_t> bestPath;
  double bestLogProbability = 0.0;
};

/// Sums over every one of the N^T state paths.
PathEnumeration enumeratePaths(const affectmod::GaussianHmm& model, const Eigen::MatrixXd& sequence);

/// Log joint probability of one path, computed term by term.
double pathLogProbability(
    const affectmod::GaussianHmm& model,
    const Eigen::MatrixXd& sequence,
    const std::vector<size_t>& path);

/// Random fully-connected model with well-conditioned covariances.
affectmod::GaussianHmm randomHmm(size_t numStates, Eigen::Index dim, std::mt19937_64& rng, bool uniformPriors = false);

/// Gift-wrapping hull followed by the shoelace formula.
double jarvisHullArea(const std::vector<Eigen::Vector2d>& points);

/// Central finite differences of a scalar function of a matrix.
Eigen::MatrixXd centralDifferenceGradient(
    const std::function<double(const Eigen::MatrixXd&)>& f,
    const Eigen::MatrixXd& at,
    double step);

/// Magnitude of a biquad's transfer function at `freqHz`, evaluated on the
/// unit circle with complex arithmetic.
double biquadMagnitude(const affectmod::Biquad& q, double freqHz, double frameRate);

/// Analog Butterworth order-2 magnitude after bilinear frequency warping.
double warpedButterworthMagnitude(double freqHz, double cutoffHz, double frameRate);

/// Goodness of clustering from per-pair accumulation over every ordered pair of
/// points; clusters are the distinct values in `assignments`.
double pairwiseGoc(const Eigen::MatrixXd& points, const std::vector<size_t>& assignments);

/// One marker assigned to every body role.
affectmod::MarkerSet singleMarkerSet();

/// A marker set with `count` markers named m0..m(count-1); every role maps to
/// all of them.
affectmod::MarkerSet sharedMarkerSet(size_t count);

/// Movement of a single marker moving along x with the given positions.
affectmod::Movement lineMovement(const std::vector<double>& xs, double frameRate = 120.0);

} // namespace oracle
