#pragma once

#include <Eigen/Core>

namespace affectmod {

enum class FilterKind { MovingAverage, Butterworth2 };

/// Low-pass filter settings. A moving average with a one-frame window is the
/// identity and disables filtering.
struct FilterParams {
  FilterKind kind = FilterKind::Butterworth2;
  double cutoffHz = 8.0; // Butterworth2
  int windowFrames = 1; // MovingAverage, odd
  bool zeroPhase = true;

  static FilterParams disabled() {
    FilterParams p;
    p.kind = FilterKind::MovingAverage;
    p.windowFrames = 1;
    return p;
  }
  static FilterParams butterworth(double cutoffHz, bool zeroPhase = true) {
    FilterParams p;
    p.kind = FilterKind::Butterworth2;
    p.cutoffHz = cutoffHz;
    p.zeroPhase = zeroPhase;
    return p;
  }
  static FilterParams movingAverage(int windowFrames, bool zeroPhase = true) {
    FilterParams p;
    p.kind = FilterKind::MovingAverage;
    p.windowFrames = windowFrames;
    p.zeroPhase = zeroPhase;
    return p;
  }

  [[nodiscard]] bool isIdentity() const {
    return kind == FilterKind::MovingAverage && windowFrames == 1;
  }

  /// Throws InvalidArgument when the settings are unusable at `frameRate`.
  void validate(double frameRate) const;
};

/// Second-order section coefficients (a0 normalized to 1).
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
};

/// Second-order Butterworth low-pass via the bilinear transform.
Biquad designButterworthLowPass(double cutoffHz, double frameRate);

/// Filters every column of a T x d series. Zero-phase variants run forward and
/// backward over an odd-reflection padded copy; output length equals input.
Eigen::MatrixXd lowPass(const Eigen::MatrixXd& series, double frameRate, const FilterParams& params);

/// First differences divided by the sample spacing, then low-pass filtered.
/// With `perFrameUnits` the spacing is one frame; otherwise 1/frameRate seconds.
/// Returns (T-1) x d.
Eigen::MatrixXd filteredDerivative(
    const Eigen::MatrixXd& series,
    double frameRate,
    const FilterParams& params,
    bool perFrameUnits = true);

} // namespace affectmod
