#pragma once

#include <Eigen/Core>

#include <vector>

namespace affectmod::geometry {

/// Area of the convex hull of 2D points (rows of an n x 2 matrix). Fewer than
/// three non-collinear points give 0.
double convexHullArea(const Eigen::MatrixX2d& points);

/// Convex hull vertices in counter-clockwise order (monotone chain).
std::vector<Eigen::Vector2d> convexHull(const Eigen::MatrixX2d& points);

/// Volume of the axis-aligned bounding box of 3D points (rows).
double boundingBoxVolume(const Eigen::MatrixX3d& points);

/// Volume of the 3D convex hull of points (rows); 0 for coplanar input.
double convexHullVolume(const Eigen::MatrixX3d& points);

struct PcaProjection {
  Eigen::MatrixX2d projected; // T x 2, mean-centered
  Eigen::Matrix<double, 3, 2> axes; // leading principal axes as columns
  Eigen::Vector3d eigenvalues; // descending
  Eigen::Vector3d mean;
};

/// Mean-centered projection onto the two leading principal axes of a T x 3
/// point set. Each axis is oriented so its largest-magnitude loading is
/// positive. Throws NumericalError "degenerate trajectory" for zero covariance.
PcaProjection pcaTop2(const Eigen::MatrixX3d& points);

} // namespace affectmod::geometry
