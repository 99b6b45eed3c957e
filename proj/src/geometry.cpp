#include "affectmod/geometry.h"

#include "affectmod/errors.h"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <utility>

namespace affectmod::geometry {

namespace {

double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

} // namespace

std::vector<Eigen::Vector2d> convexHull(const Eigen::MatrixX2d& points) {
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(static_cast<size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    pts.emplace_back(points(i, 0), points(i, 1));
  }
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(
      std::unique(
          pts.begin(),
          pts.end(),
          [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a == b; }),
      pts.end());
  if (pts.size() < 3) {
    return pts;
  }
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= 0.0) {
      --k;
    }
    hull[k++] = p;
  }
  for (size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const auto& p = pts[i];
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], p) <= 0.0) {
      --k;
    }
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

double convexHullArea(const Eigen::MatrixX2d& points) {
  const auto hull = convexHull(points);
  if (hull.size() < 3) {
    return 0.0;
  }
  double twiceArea = 0.0;
  for (size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    twiceArea += a.x() * b.y() - b.x() * a.y();
  }
  return std::abs(twiceArea) / 2.0;
}

double boundingBoxVolume(const Eigen::MatrixX3d& points) {
  if (points.rows() == 0) {
    return 0.0;
  }
  const Eigen::RowVector3d extent = points.colwise().maxCoeff() - points.colwise().minCoeff();
  return extent.prod();
}

double convexHullVolume(const Eigen::MatrixX3d& points) {
  const Eigen::Index n = points.rows();
  if (n < 4) {
    return 0.0;
  }
  auto pt = [&](Eigen::Index i) -> Eigen::Vector3d { return points.row(i).transpose(); };
  const double scale =
      (points.colwise().maxCoeff() - points.colwise().minCoeff()).norm();
  if (scale == 0.0) {
    return 0.0;
  }
  const double eps = 1e-10 * scale;

  // Initial tetrahedron from extreme points.
  Eigen::Index i0 = 0;
  Eigen::Index i1 = 0;
  double best = -1.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    const double d = (pt(i) - pt(0)).norm();
    if (d > best) {
      best = d;
      i1 = i;
    }
  }
  best = -1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = (pt(i) - pt(i1)).norm();
    if (d > best) {
      best = d;
      i0 = i;
    }
  }
  if (best <= eps) {
    return 0.0;
  }
  const Eigen::Vector3d dir = (pt(i1) - pt(i0)).normalized();
  Eigen::Index i2 = -1;
  best = eps;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = (pt(i) - pt(i0)).cross(dir).norm();
    if (d > best) {
      best = d;
      i2 = i;
    }
  }
  if (i2 < 0) {
    return 0.0;
  }
  const Eigen::Vector3d planeNormal = (pt(i1) - pt(i0)).cross(pt(i2) - pt(i0)).normalized();
  Eigen::Index i3 = -1;
  best = eps;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = std::abs(planeNormal.dot(pt(i) - pt(i0)));
    if (d > best) {
      best = d;
      i3 = i;
    }
  }
  if (i3 < 0) {
    return 0.0;
  }

  const Eigen::Vector3d interior = (pt(i0) + pt(i1) + pt(i2) + pt(i3)) / 4.0;
  using Face = std::array<Eigen::Index, 3>;
  std::vector<Face> faces;
  auto addFace = [&](Eigen::Index a, Eigen::Index b, Eigen::Index c) {
    const Eigen::Vector3d normal = (pt(b) - pt(a)).cross(pt(c) - pt(a));
    if (normal.dot(pt(a) - interior) < 0.0) {
      std::swap(b, c);
    }
    faces.push_back({a, b, c});
  };
  addFace(i0, i1, i2);
  addFace(i0, i1, i3);
  addFace(i0, i2, i3);
  addFace(i1, i2, i3);

  auto visible = [&](const Face& f, const Eigen::Vector3d& p) {
    const Eigen::Vector3d normal = (pt(f[1]) - pt(f[0])).cross(pt(f[2]) - pt(f[0]));
    const double len = normal.norm();
    if (len == 0.0) {
      return false;
    }
    return normal.dot(p - pt(f[0])) / len > eps;
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == i0 || i == i1 || i == i2 || i == i3) {
      continue;
    }
    const Eigen::Vector3d p = pt(i);
    std::vector<Face> kept;
    std::set<std::pair<Eigen::Index, Eigen::Index>> visibleEdges;
    for (const auto& f : faces) {
      if (visible(f, p)) {
        for (int e = 0; e < 3; ++e) {
          visibleEdges.emplace(f[e], f[(e + 1) % 3]);
        }
      } else {
        kept.push_back(f);
      }
    }
    if (kept.size() == faces.size()) {
      continue;
    }
    for (const auto& [a, b] : visibleEdges) {
      if (!visibleEdges.count({b, a})) {
        kept.push_back({a, b, i});
      }
    }
    faces = std::move(kept);
  }

  double volume = 0.0;
  for (const auto& f : faces) {
    volume += (pt(f[0]) - interior).dot((pt(f[1]) - interior).cross(pt(f[2]) - interior));
  }
  return std::abs(volume) / 6.0;
}

PcaProjection pcaTop2(const Eigen::MatrixX3d& points) {
  if (points.rows() < 3) {
    throw InvalidArgument("PCA projection needs at least 3 points");
  }
  PcaProjection result;
  result.mean = points.colwise().mean().transpose();
  const Eigen::MatrixX3d centered = points.rowwise() - result.mean.transpose();
  const Eigen::Matrix3d cov =
      centered.transpose() * centered / static_cast<double>(points.rows() - 1);
  if (cov.cwiseAbs().maxCoeff() == 0.0) {
    throw NumericalError("degenerate trajectory: zero covariance");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  // Eigen returns ascending eigenvalues.
  for (int k = 0; k < 3; ++k) {
    result.eigenvalues(k) = solver.eigenvalues()(2 - k);
  }
  for (int k = 0; k < 2; ++k) {
    Eigen::Vector3d axis = solver.eigenvectors().col(2 - k);
    Eigen::Index largest = 0;
    axis.cwiseAbs().maxCoeff(&largest);
    if (axis(largest) < 0.0) {
      axis = -axis;
    }
    result.axes.col(k) = axis;
  }
  result.projected = centered * result.axes;
  return result;
}

} // namespace affectmod::geometry
