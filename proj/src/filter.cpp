#include "affectmod/filter.h"

#include "affectmod/errors.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace affectmod {

namespace {

// Direct form II transposed pass with the state initialized to the steady
// state of a constant input equal to the first sample.
void biquadPass(const Biquad& f, std::vector<double>& x) {
  if (x.empty()) {
    return;
  }
  const double dcGain = (f.b0 + f.b1 + f.b2) / (1.0 + f.a1 + f.a2);
  const double x0 = x.front();
  const double y0 = dcGain * x0;
  double z1 = y0 - f.b0 * x0;
  double z2 = f.b2 * x0 - f.a2 * y0;
  for (double& v : x) {
    const double in = v;
    const double out = f.b0 * in + z1;
    z1 = f.b1 * in - f.a1 * out + z2;
    z2 = f.b2 * in - f.a2 * out;
    v = out;
  }
}

// Centered (or trailing, when causal) moving average with windows shrunk at
// the ends of the series.
void movingAveragePass(int window, bool centered, std::vector<double>& x) {
  const auto n = static_cast<long>(x.size());
  if (window <= 1 || n == 0) {
    return;
  }
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (long i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i] + x[i];
  }
  const long half = window / 2;
  std::vector<double> out(x.size());
  for (long i = 0; i < n; ++i) {
    long lo = centered ? i - half : i - window + 1;
    long hi = centered ? i + half : i;
    lo = std::max(lo, 0L);
    hi = std::min(hi, n - 1);
    out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  x = std::move(out);
}

// Odd reflection about each endpoint: x[-i] = 2 x[0] - x[i].
std::vector<double> padOddReflection(const std::vector<double>& x, size_t pad) {
  const size_t n = x.size();
  std::vector<double> out;
  out.reserve(n + 2 * pad);
  for (size_t i = pad; i >= 1; --i) {
    out.push_back(2.0 * x.front() - x[i]);
  }
  out.insert(out.end(), x.begin(), x.end());
  for (size_t i = 1; i <= pad; ++i) {
    out.push_back(2.0 * x.back() - x[n - 1 - i]);
  }
  return out;
}

} // namespace

void FilterParams::validate(double frameRate) const {
  switch (kind) {
    case FilterKind::MovingAverage:
      if (windowFrames < 1 || windowFrames % 2 == 0) {
        throw InvalidArgument(
            fmt::format("moving-average window must be odd and >= 1, got {}", windowFrames));
      }
      break;
    case FilterKind::Butterworth2:
      if (!(cutoffHz > 0.0)) {
        throw InvalidArgument("low-pass cutoff must be positive");
      }
      if (!(cutoffHz < frameRate / 2.0)) {
        throw InvalidArgument(fmt::format(
            "low-pass cutoff {} Hz is not below the Nyquist frequency {} Hz",
            cutoffHz,
            frameRate / 2.0));
      }
      break;
  }
}

Biquad designButterworthLowPass(double cutoffHz, double frameRate) {
  const double k = std::tan(std::numbers::pi * cutoffHz / frameRate);
  const double k2 = k * k;
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
  Biquad f;
  f.b0 = k2 * norm;
  f.b1 = 2.0 * f.b0;
  f.b2 = f.b0;
  f.a1 = 2.0 * (k2 - 1.0) * norm;
  f.a2 = (1.0 - std::numbers::sqrt2 * k + k2) * norm;
  return f;
}

Eigen::MatrixXd lowPass(const Eigen::MatrixXd& series, double frameRate, const FilterParams& params) {
  params.validate(frameRate);
  if (params.isIdentity() || series.rows() < 2) {
    return series;
  }
  const size_t n = static_cast<size_t>(series.rows());
  Eigen::MatrixXd out(series.rows(), series.cols());
  std::vector<double> column(n);

  if (params.kind == FilterKind::MovingAverage) {
    const size_t pad = params.zeroPhase
        ? std::min<size_t>(static_cast<size_t>(params.windowFrames / 2), n - 1)
        : 0;
    for (Eigen::Index c = 0; c < series.cols(); ++c) {
      for (size_t t = 0; t < n; ++t) {
        column[t] = series(static_cast<Eigen::Index>(t), c);
      }
      std::vector<double> work = pad > 0 ? padOddReflection(column, pad) : column;
      movingAveragePass(params.windowFrames, params.zeroPhase, work);
      for (size_t t = 0; t < n; ++t) {
        out(static_cast<Eigen::Index>(t), c) = work[t + pad];
      }
    }
    return out;
  }

  const Biquad f = designButterworthLowPass(params.cutoffHz, frameRate);
  const size_t pad = params.zeroPhase ? std::min<size_t>(9, n - 1) : 0;
  for (Eigen::Index c = 0; c < series.cols(); ++c) {
    for (size_t t = 0; t < n; ++t) {
      column[t] = series(static_cast<Eigen::Index>(t), c);
    }
    std::vector<double> work = pad > 0 ? padOddReflection(column, pad) : column;
    biquadPass(f, work);
    if (params.zeroPhase) {
      std::reverse(work.begin(), work.end());
      biquadPass(f, work);
      std::reverse(work.begin(), work.end());
    }
    for (size_t t = 0; t < n; ++t) {
      out(static_cast<Eigen::Index>(t), c) = work[t + pad];
    }
  }
  return out;
}

Eigen::MatrixXd filteredDerivative(
    const Eigen::MatrixXd& series,
    double frameRate,
    const FilterParams& params,
    bool perFrameUnits) {
  if (series.rows() < 2) {
    throw InvalidArgument(
        fmt::format("derivative needs at least 2 samples, got {}", series.rows()));
  }
  if (!(frameRate > 0.0)) {
    throw InvalidArgument("frame rate must be positive");
  }
  const Eigen::Index n = series.rows();
  Eigen::MatrixXd diff = series.bottomRows(n - 1) - series.topRows(n - 1);
  if (!perFrameUnits) {
    diff *= frameRate;
  }
  return lowPass(diff, frameRate, params);
}

} // namespace affectmod
