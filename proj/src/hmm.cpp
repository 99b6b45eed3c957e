#include "affectmod/hmm.h"

#include "affectmod/errors.h"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace affectmod {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logSumExp(const double* values, Eigen::Index count) {
  double m = kNegInf;
  for (Eigen::Index i = 0; i < count; ++i) {
    m = std::max(m, values[i]);
  }
  if (m == kNegInf) {
    return kNegInf;
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < count; ++i) {
    sum += std::exp(values[i] - m);
  }
  return m + std::log(sum);
}

Eigen::MatrixXd elementwiseLog(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : kNegInf; });
}

void checkSequence(const GaussianHmm& model, const Eigen::MatrixXd& sequence) {
  if (sequence.cols() != model.dim()) {
    throw InvalidArgument(fmt::format(
        "dimension mismatch: model has d = {}, sequence has {} columns",
        model.dim(),
        sequence.cols()));
  }
  if (sequence.rows() == 0) {
    throw InvalidArgument("empty observation sequence");
  }
}

struct ForwardBackward {
  Eigen::MatrixXd logAlpha; // T x N
  Eigen::MatrixXd logBeta; // T x N
  double logLikelihood = 0.0;
};

Eigen::MatrixXd forwardPass(
    const Eigen::MatrixXd& logB,
    const Eigen::MatrixXd& logA,
    const Eigen::VectorXd& logPi) {
  const Eigen::Index t = logB.rows();
  const Eigen::Index n = logB.cols();
  Eigen::MatrixXd logAlpha(t, n);
  logAlpha.row(0) = logPi.transpose() + logB.row(0);
  std::vector<double> terms(static_cast<size_t>(n));
  for (Eigen::Index s = 1; s < t; ++s) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        terms[static_cast<size_t>(i)] = logAlpha(s - 1, i) + logA(i, j);
      }
      logAlpha(s, j) = logSumExp(terms.data(), n) + logB(s, j);
    }
  }
  return logAlpha;
}

ForwardBackward forwardBackward(
    const Eigen::MatrixXd& logB,
    const Eigen::MatrixXd& logA,
    const Eigen::VectorXd& logPi) {
  ForwardBackward fb;
  const Eigen::Index t = logB.rows();
  const Eigen::Index n = logB.cols();
  fb.logAlpha = forwardPass(logB, logA, logPi);
  fb.logBeta = Eigen::MatrixXd::Zero(t, n);
  std::vector<double> terms(static_cast<size_t>(n));
  for (Eigen::Index s = t - 2; s >= 0; --s) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        terms[static_cast<size_t>(j)] = logA(i, j) + logB(s + 1, j) + fb.logBeta(s + 1, j);
      }
      fb.logBeta(s, i) = logSumExp(terms.data(), n);
    }
  }
  const Eigen::RowVectorXd last = fb.logAlpha.row(t - 1);
  fb.logLikelihood = logSumExp(last.data(), n);
  return fb;
}

} // namespace

void GaussianHmm::validate() const {
  const auto n = transitions.rows();
  if (n < 1 || transitions.cols() != n || priors.size() != n || means.rows() != n ||
      covariances.size() != static_cast<size_t>(n) || means.cols() < 1) {
    throw InvalidArgument("HMM parameter shapes are inconsistent");
  }
  if ((transitions.array() < 0.0).any() || !transitions.allFinite()) {
    throw InvalidArgument("transition entries must be finite and non-negative");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(transitions.row(i).sum() - 1.0) > 1e-9) {
      throw InvalidArgument(fmt::format("transition row {} does not sum to 1", i));
    }
  }
  if ((priors.array() < 0.0).any() || std::abs(priors.sum() - 1.0) > 1e-9) {
    throw InvalidArgument("priors must be a probability vector");
  }
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto& cov = covariances[static_cast<size_t>(s)];
    if (cov.rows() != means.cols() || cov.cols() != means.cols()) {
      throw InvalidArgument(fmt::format("covariance {} has the wrong shape", s));
    }
    if (!cov.isApprox(cov.transpose(), 1e-9)) {
      throw InvalidArgument(fmt::format("covariance {} is not symmetric", s));
    }
    if (Eigen::LLT<Eigen::MatrixXd>(cov).info() != Eigen::Success) {
      throw InvalidArgument(fmt::format("covariance {} is not positive definite", s));
    }
  }
}

Eigen::MatrixXd GaussianHmm::emissionLogDensities(const Eigen::MatrixXd& sequence) const {
  const Eigen::Index d = dim();
  const Eigen::Index t = sequence.rows();
  const auto n = static_cast<Eigen::Index>(numStates());
  Eigen::MatrixXd logB(t, n);
  const double logTwoPi = std::log(2.0 * std::numbers::pi);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::LLT<Eigen::MatrixXd> llt(covariances[static_cast<size_t>(s)]);
    if (llt.info() != Eigen::Success) {
      throw NumericalError(fmt::format("covariance of state {} is not positive definite", s));
    }
    const double logDet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    Eigen::MatrixXd diff = (sequence.rowwise() - means.row(s)).transpose(); // d x T
    llt.matrixL().solveInPlace(diff);
    logB.col(s) =
        -0.5 * (diff.colwise().squaredNorm().transpose().array() + logDet + static_cast<double>(d) * logTwoPi);
  }
  return logB;
}

GaussianHmm initSegmental(
    const std::vector<Eigen::MatrixXd>& sequences,
    size_t numStates,
    double covarianceFloor) {
  if (numStates < 1) {
    throw InvalidArgument("an HMM needs at least one state");
  }
  if (sequences.empty()) {
    throw InvalidArgument("segmental initialization needs at least one sequence");
  }
  const Eigen::Index d = sequences.front().cols();
  const auto n = static_cast<Eigen::Index>(numStates);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n, d);
  std::vector<Eigen::MatrixXd> outer(numStates, Eigen::MatrixXd::Zero(d, d));
  std::vector<double> counts(numStates, 0.0);

  for (size_t q = 0; q < sequences.size(); ++q) {
    const auto& seq = sequences[q];
    if (seq.cols() != d) {
      throw InvalidArgument(fmt::format("sequence {} has dimension {}, expected {}", q, seq.cols(), d));
    }
    const auto length = static_cast<size_t>(seq.rows());
    if (length < numStates) {
      throw InvalidArgument(fmt::format(
          "sequence {} has {} frames, fewer than the {} states", q, length, numStates));
    }
    const size_t base = length / numStates;
    const size_t extra = length % numStates;
    Eigen::Index start = 0;
    for (size_t s = 0; s < numStates; ++s) {
      const auto len = static_cast<Eigen::Index>(base + (s < extra ? 1 : 0));
      const auto block = seq.middleRows(start, len);
      sums.row(static_cast<Eigen::Index>(s)) += block.colwise().sum();
      outer[s] += block.transpose() * block;
      counts[s] += static_cast<double>(len);
      start += len;
    }
  }

  GaussianHmm model;
  model.transitions = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  model.priors = Eigen::VectorXd::Zero(n);
  model.priors(0) = 1.0;
  model.means.resize(n, d);
  model.covariances.resize(numStates);
  for (size_t s = 0; s < numStates; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const Eigen::RowVectorXd mean = sums.row(si) / counts[s];
    model.means.row(si) = mean;
    Eigen::MatrixXd cov = outer[s] / counts[s] - mean.transpose() * mean;
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal().array() += covarianceFloor;
    model.covariances[s] = cov;
  }
  return model;
}

std::pair<GaussianHmm, TrainReport> baumWelch(
    const std::vector<Eigen::MatrixXd>& sequences,
    const GaussianHmm& init,
    const BaumWelchOptions& options) {
  if (sequences.empty()) {
    throw InvalidArgument("Baum-Welch needs at least one sequence");
  }
  init.validate();
  for (const auto& seq : sequences) {
    checkSequence(init, seq);
  }
  const auto n = static_cast<Eigen::Index>(init.numStates());
  const Eigen::Index d = init.dim();
  double totalFrames = 0.0;
  for (const auto& seq : sequences) {
    totalFrames += static_cast<double>(seq.rows());
  }

  GaussianHmm model = init;
  TrainReport report;
  const Eigen::VectorXd logPi = elementwiseLog(model.priors);

  for (size_t iter = 0;; ++iter) {
    const Eigen::MatrixXd logA = elementwiseLog(model.transitions);
    Eigen::MatrixXd xiSum = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd gammaSum = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd weightedSum = Eigen::MatrixXd::Zero(n, d);
    std::vector<Eigen::MatrixXd> gammas;
    gammas.reserve(sequences.size());
    double total = 0.0;

    for (const auto& seq : sequences) {
      const Eigen::MatrixXd logB = model.emissionLogDensities(seq);
      const auto fb = forwardBackward(logB, logA, logPi);
      if (!std::isfinite(fb.logLikelihood)) {
        throw NumericalError(fmt::format("numerical failure at iteration {}", iter));
      }
      total += fb.logLikelihood;
      Eigen::MatrixXd gamma = (fb.logAlpha + fb.logBeta).array() - fb.logLikelihood;
      gamma = gamma.array().exp();
      // Subnormal responsibilities stall the covariance products.
      gamma = (gamma.array() < 1e-250).select(0.0, gamma);
      gammaSum += gamma.colwise().sum().transpose();
      weightedSum += gamma.transpose() * seq;
      for (Eigen::Index t = 0; t + 1 < seq.rows(); ++t) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const double left = fb.logAlpha(t, i) - fb.logLikelihood;
          if (left == kNegInf) {
            continue;
          }
          for (Eigen::Index j = 0; j < n; ++j) {
            const double v = left + logA(i, j) + logB(t + 1, j) + fb.logBeta(t + 1, j);
            if (v != kNegInf) {
              xiSum(i, j) += std::exp(v);
            }
          }
        }
      }
      gammas.push_back(std::move(gamma));
    }
    if (!std::isfinite(total)) {
      throw NumericalError(fmt::format("numerical failure at iteration {}", iter));
    }
    report.logLikelihoodPerIter.push_back(total);
    const size_t evaluated = report.logLikelihoodPerIter.size();
    if (evaluated >= 2) {
      const double gain = (total - report.logLikelihoodPerIter[evaluated - 2]) / totalFrames;
      if (gain < options.tolerance) {
        report.converged = true;
        break;
      }
    }
    if (iter >= options.maxIter) {
      break;
    }

    // M-step.
    for (Eigen::Index i = 0; i < n; ++i) {
      const double rowSum = xiSum.row(i).sum();
      if (rowSum > 0.0) {
        model.transitions.row(i) = xiSum.row(i) / rowSum;
      }
    }
    for (Eigen::Index s = 0; s < n; ++s) {
      if (gammaSum(s) < 1e-10) {
        continue;
      }
      const Eigen::RowVectorXd mean = weightedSum.row(s) / gammaSum(s);
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (size_t q = 0; q < sequences.size(); ++q) {
        const Eigen::MatrixXd centered = sequences[q].rowwise() - mean;
        cov.noalias() += centered.transpose() * gammas[q].col(s).asDiagonal() * centered;
      }
      cov /= gammaSum(s);
      cov = 0.5 * (cov + cov.transpose());
      cov.diagonal().array() += options.covarianceFloor;
      model.means.row(s) = mean;
      model.covariances[static_cast<size_t>(s)] = std::move(cov);
    }
    report.iterations = iter + 1;
  }
  return {std::move(model), std::move(report)};
}

double logLikelihood(const GaussianHmm& model, const Eigen::MatrixXd& sequence) {
  checkSequence(model, sequence);
  const Eigen::MatrixXd logAlpha = forwardPass(
      model.emissionLogDensities(sequence), elementwiseLog(model.transitions), elementwiseLog(model.priors));
  const Eigen::RowVectorXd last = logAlpha.row(logAlpha.rows() - 1);
  return logSumExp(last.data(), last.size());
}

std::vector<size_t> viterbi(const GaussianHmm& model, const Eigen::MatrixXd& sequence) {
  checkSequence(model, sequence);
  const Eigen::MatrixXd logB = model.emissionLogDensities(sequence);
  const Eigen::MatrixXd logA = elementwiseLog(model.transitions);
  const Eigen::VectorXd logPi = elementwiseLog(model.priors);
  const Eigen::Index t = logB.rows();
  const Eigen::Index n = logB.cols();
  Eigen::MatrixXd delta(t, n);
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> back(t, n);
  delta.row(0) = logPi.transpose() + logB.row(0);
  back.row(0).setZero();
  for (Eigen::Index s = 1; s < t; ++s) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double best = kNegInf;
      Eigen::Index arg = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = delta(s - 1, i) + logA(i, j);
        if (v > best) {
          best = v;
          arg = i;
        }
      }
      delta(s, j) = best + logB(s, j);
      back(s, j) = arg;
    }
  }
  Eigen::Index state = 0;
  double best = kNegInf;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (delta(t - 1, j) > best) {
      best = delta(t - 1, j);
      state = j;
    }
  }
  std::vector<size_t> path(static_cast<size_t>(t));
  for (Eigen::Index s = t - 1; s >= 0; --s) {
    path[static_cast<size_t>(s)] = static_cast<size_t>(state);
    state = back(s, state);
  }
  return path;
}

double pathLogProbability(
    const GaussianHmm& model,
    const Eigen::MatrixXd& sequence,
    const std::vector<size_t>& states) {
  checkSequence(model, sequence);
  if (states.size() != static_cast<size_t>(sequence.rows())) {
    throw InvalidArgument("state path length differs from the sequence length");
  }
  const Eigen::MatrixXd logB = model.emissionLogDensities(sequence);
  auto logOf = [](double v) { return v > 0.0 ? std::log(v) : kNegInf; };
  double total = logOf(model.priors(static_cast<Eigen::Index>(states[0]))) + logB(0, static_cast<Eigen::Index>(states[0]));
  for (size_t s = 1; s < states.size(); ++s) {
    total += logOf(model.transitions(static_cast<Eigen::Index>(states[s - 1]), static_cast<Eigen::Index>(states[s])));
    total += logB(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(states[s]));
  }
  return total;
}

SampledSequence sampleSequence(const GaussianHmm& model, size_t length, std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(model.numStates());
  const Eigen::Index d = model.dim();
  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(model.numStates());
  for (const auto& cov : model.covariances) {
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("cannot sample from a non positive definite covariance");
    }
    factors.push_back(llt.matrixL());
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](const Eigen::RowVectorXd& probs) {
    const double u = uniform(rng);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += probs(i);
      if (u < acc) {
        return i;
      }
    }
    // Rounding left u above the cumulative sum; take the last supported state.
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      if (probs(i) > 0.0) {
        return i;
      }
    }
    return Eigen::Index{0};
  };

  SampledSequence out;
  out.observations.resize(static_cast<Eigen::Index>(length), d);
  out.states.resize(length);
  Eigen::Index state = draw(model.priors.transpose());
  Eigen::VectorXd z(d);
  for (size_t t = 0; t < length; ++t) {
    if (t > 0) {
      state = draw(model.transitions.row(state));
    }
    for (Eigen::Index k = 0; k < d; ++k) {
      z(k) = normal(rng);
    }
    out.observations.row(static_cast<Eigen::Index>(t)) =
        model.means.row(state) + (factors[static_cast<size_t>(state)] * z).transpose();
    out.states[t] = static_cast<size_t>(state);
  }
  return out;
}

KlEstimate klDivergence(
    const GaussianHmm& a,
    const GaussianHmm& b,
    size_t numSamples,
    size_t horizon,
    uint64_t seed) {
  if (a.dim() != b.dim()) {
    throw InvalidArgument(
        fmt::format("dimension mismatch: models have d = {} and d = {}", a.dim(), b.dim()));
  }
  if (numSamples == 0 || horizon == 0) {
    throw InvalidArgument("KL estimate needs at least one sample of positive length");
  }
  std::mt19937_64 rng(seed);
  double sum = 0.0;
  double sumSq = 0.0;
  for (size_t i = 0; i < numSamples; ++i) {
    const auto sample = sampleSequence(a, horizon, rng);
    const double diff = logLikelihood(a, sample.observations) - logLikelihood(b, sample.observations);
    sum += diff;
    sumSq += diff * diff;
  }
  const auto count = static_cast<double>(numSamples);
  KlEstimate est;
  est.value = sum / count;
  const double variance = numSamples > 1
      ? std::max(0.0, (sumSq - count * est.value * est.value) / (count - 1.0))
      : 0.0;
  est.standardError = std::sqrt(variance / count);
  return est;
}

double klDistance(
    const GaussianHmm& a,
    const GaussianHmm& b,
    size_t numSamples,
    size_t horizon,
    uint64_t seed) {
  const double ab = klDivergence(a, b, numSamples, horizon, seed).value;
  const double ba = klDivergence(b, a, numSamples, horizon, seed).value;
  return (ab + ba) / 2.0;
}

} // namespace affectmod
