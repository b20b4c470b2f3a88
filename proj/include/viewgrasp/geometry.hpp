#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "viewgrasp/error.hpp"

namespace viewgrasp {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

/// Points stored column-wise (3 x n). Normals, when present, have the same
/// shape and unit columns.
template <typename Scalar>
struct BasicPointCloud {
  Points3<Scalar> points;
  std::optional<Points3<Scalar>> normals;

  BasicPointCloud() = default;
  explicit BasicPointCloud(Points3<Scalar> pts) : points(std::move(pts)) {}
  BasicPointCloud(Points3<Scalar> pts, Points3<Scalar> nrm)
      : points(std::move(pts)), normals(std::move(nrm)) {
    require(normals->cols() == points.cols(), ErrorKind::Argument,
            "normals and points differ in count");
  }

  Eigen::Index size() const { return points.cols(); }
  bool empty() const { return points.cols() == 0; }
  bool has_normals() const { return normals.has_value(); }

  template <typename Other>
  BasicPointCloud<Other> cast() const {
    BasicPointCloud<Other> out(points.template cast<Other>());
    if (normals) out.normals = normals->template cast<Other>();
    return out;
  }
};

using PointCloud = BasicPointCloud<double>;
using PointCloudf = BasicPointCloud<float>;

/// Right-handed orthonormal frame; axes columns are X, Y, Z.
template <typename Scalar>
struct BasicReferenceFrame {
  Vec3<Scalar> origin = Vec3<Scalar>::Zero();
  Mat3<Scalar> axes = Mat3<Scalar>::Identity();

  Vec3<Scalar> x() const { return axes.col(0); }
  Vec3<Scalar> y() const { return axes.col(1); }
  Vec3<Scalar> z() const { return axes.col(2); }

  Vec3<Scalar> to_local(const Vec3<Scalar>& p) const { return axes.transpose() * (p - origin); }
  Vec3<Scalar> to_parent(const Vec3<Scalar>& p) const { return axes * p + origin; }
};

using ReferenceFrame = BasicReferenceFrame<double>;

template <typename Scalar>
struct BasicAabb {
  Vec3<Scalar> min;
  Vec3<Scalar> max;

  Vec3<Scalar> sides() const { return max - min; }
  /// l_p: the largest side, used as the scale-invariant projection plane side.
  Scalar largest_side() const { return sides().maxCoeff(); }
};

using Aabb = BasicAabb<double>;

template <typename Scalar>
Vec3<Scalar> centroid(const BasicPointCloud<Scalar>& cloud) {
  require(!cloud.empty(), ErrorKind::EmptyCloud, "centroid of an empty cloud");
  return cloud.points.rowwise().mean();
}

/// Population covariance (1/n) sum (p - c)(p - c)^T.
template <typename Scalar>
Mat3<Scalar> covariance(const BasicPointCloud<Scalar>& cloud, const Vec3<Scalar>& center) {
  const Points3<Scalar> centered = cloud.points.colwise() - center;
  return (centered * centered.transpose()) / static_cast<Scalar>(cloud.size());
}

namespace detail {

// Orients an eigenvector so the third moment of the centered projections is
// non-negative. The first moment vanishes about the centroid, so skewness is
// the lowest moment that carries a sign. Symmetric data falls back to making
// the largest-magnitude component positive.
template <typename Scalar>
Vec3<Scalar> disambiguate_sign(const Vec3<Scalar>& axis, const Points3<Scalar>& centered,
                               Scalar variance) {
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> proj = axis.transpose() * centered;
  const Scalar third = proj.array().cube().mean();
  const Scalar scale = std::pow(std::max(variance, Scalar(0)), Scalar(1.5));
  if (std::abs(third) > Scalar(1e-6) * scale) return third < 0 ? Vec3<Scalar>(-axis) : axis;
  Eigen::Index idx = 0;
  axis.cwiseAbs().maxCoeff(&idx);
  return axis(idx) < 0 ? Vec3<Scalar>(-axis) : axis;
}

}  // namespace detail

struct FrameOptions {
  double min_largest_eigenvalue = 1e-12;
  double min_eigenvalue_ratio = 1e-6;
};

/// Eigenvalues of the cloud covariance, sorted descending.
template <typename Scalar>
Vec3<Scalar> principal_variances(const BasicPointCloud<Scalar>& cloud) {
  const Vec3<Scalar> c = centroid(cloud);
  Eigen::SelfAdjointEigenSolver<Mat3<Scalar>> solver(covariance(cloud, c), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().reverse();
}

/// Object-centric frame: origin at the centroid, X and Y along the two
/// largest principal directions, Z = X x Y.
template <typename Scalar>
BasicReferenceFrame<Scalar> local_reference_frame(const BasicPointCloud<Scalar>& cloud,
                                                  const FrameOptions& options = {}) {
  require(cloud.size() >= 3, ErrorKind::DegenerateGeometry,
          "reference frame needs at least 3 points");
  const Vec3<Scalar> c = centroid(cloud);
  const Points3<Scalar> centered = cloud.points.colwise() - c;
  const Mat3<Scalar> cov = (centered * centered.transpose()) / static_cast<Scalar>(cloud.size());

  // Eigen returns eigenvalues in ascending order.
  Eigen::SelfAdjointEigenSolver<Mat3<Scalar>> solver(cov);
  const Vec3<Scalar> evals = solver.eigenvalues();
  const Scalar e1 = evals(2);
  const Scalar e2 = evals(1);
  if (!(e1 >= Scalar(options.min_largest_eigenvalue)) ||
      e2 / e1 < Scalar(options.min_eigenvalue_ratio)) {
    fail(ErrorKind::DegenerateGeometry, "covariance is rank-deficient (collinear or coincident points)");
  }

  BasicReferenceFrame<Scalar> frame;
  frame.origin = c;
  const Vec3<Scalar> x = detail::disambiguate_sign<Scalar>(solver.eigenvectors().col(2), centered, e1);
  const Vec3<Scalar> y = detail::disambiguate_sign<Scalar>(solver.eigenvectors().col(1), centered, e2);
  frame.axes.col(0) = x.normalized();
  frame.axes.col(1) = y.normalized();
  frame.axes.col(2) = frame.axes.col(0).cross(frame.axes.col(1));
  return frame;
}

/// Maps each point p to axes^T (p - origin) and rotates normals by axes^T.
template <typename Scalar>
BasicPointCloud<Scalar> transform_to_frame(const BasicPointCloud<Scalar>& cloud,
                                           const BasicReferenceFrame<Scalar>& frame) {
  BasicPointCloud<Scalar> out(frame.axes.transpose() * (cloud.points.colwise() - frame.origin));
  if (cloud.normals) out.normals = frame.axes.transpose() * (*cloud.normals);
  return out;
}

template <typename Scalar>
BasicPointCloud<Scalar> transform_from_frame(const BasicPointCloud<Scalar>& cloud,
                                             const BasicReferenceFrame<Scalar>& frame) {
  BasicPointCloud<Scalar> out((frame.axes * cloud.points).colwise() + frame.origin);
  if (cloud.normals) out.normals = frame.axes * (*cloud.normals);
  return out;
}

/// Applies p -> R p + t (normals rotated by R).
template <typename Scalar>
BasicPointCloud<Scalar> rigid_transform(const BasicPointCloud<Scalar>& cloud, const Mat3<Scalar>& rotation,
                                        const Vec3<Scalar>& translation) {
  BasicPointCloud<Scalar> out((rotation * cloud.points).colwise() + translation);
  if (cloud.normals) out.normals = rotation * (*cloud.normals);
  return out;
}

template <typename Scalar>
BasicAabb<Scalar> aabb(const BasicPointCloud<Scalar>& cloud) {
  require(!cloud.empty(), ErrorKind::EmptyCloud, "bounding box of an empty cloud");
  return {cloud.points.rowwise().minCoeff(), cloud.points.rowwise().maxCoeff()};
}

/// Per-point normals from the smallest-eigenvalue direction of the k nearest
/// neighbours (brute-force search), flipped to point away from the centroid.
template <typename Scalar>
BasicPointCloud<Scalar> estimate_normals(const BasicPointCloud<Scalar>& cloud, int neighbors) {
  require(neighbors > 0, ErrorKind::Argument, "neighbors must be positive");
  require(cloud.size() > neighbors, ErrorKind::DegenerateGeometry,
          "too few points for the requested neighbourhood size");
  const Eigen::Index n = cloud.size();
  const Vec3<Scalar> c = centroid(cloud);
  Points3<Scalar> normals(3, n);
  std::vector<std::pair<Scalar, Eigen::Index>> dist(static_cast<std::size_t>(n));
  const auto kk = static_cast<std::size_t>(neighbors) + 1;  // includes the point itself
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3<Scalar> p = cloud.points.col(i);
    for (Eigen::Index j = 0; j < n; ++j)
      dist[static_cast<std::size_t>(j)] = {(cloud.points.col(j) - p).squaredNorm(), j};
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk - 1), dist.end());
    Vec3<Scalar> mean = Vec3<Scalar>::Zero();
    for (std::size_t m = 0; m < kk; ++m) mean += cloud.points.col(dist[m].second);
    mean /= static_cast<Scalar>(kk);
    Mat3<Scalar> cov = Mat3<Scalar>::Zero();
    for (std::size_t m = 0; m < kk; ++m) {
      const Vec3<Scalar> d = cloud.points.col(dist[m].second) - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3<Scalar>> solver(cov);
    Vec3<Scalar> normal = solver.eigenvectors().col(0).normalized();
    if (normal.dot(p - c) < 0) normal = -normal;
    normals.col(i) = normal;
  }
  return BasicPointCloud<Scalar>(cloud.points, std::move(normals));
}

enum class Primitive { Box, Cylinder, Sphere };

/// Dimensions for sample_primitive: box uses (x, y, z) extents, cylinder uses
/// (radius, height), sphere uses radius. Unused entries are ignored.
struct PrimitiveParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Deterministic area-weighted surface samples of a primitive centred at the
/// origin (cylinder axis along z), with analytic outward normals.
template <typename Scalar = double>
BasicPointCloud<Scalar> sample_primitive(Primitive shape, const PrimitiveParams& params, int count,
                                         std::uint64_t seed) {
  require(count > 0, ErrorKind::Argument, "sample count must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Points3<Scalar> pts(3, count);
  Points3<Scalar> nrm(3, count);

  switch (shape) {
    case Primitive::Box: {
      require(params.a > 0 && params.b > 0 && params.c > 0, ErrorKind::Argument,
              "box extents must be positive");
      const double h[3] = {params.a / 2, params.b / 2, params.c / 2};
      // Face pairs indexed by their normal axis; area of each face.
      const double area[3] = {params.b * params.c, params.a * params.c, params.a * params.b};
      const double total = 2 * (area[0] + area[1] + area[2]);
      for (int i = 0; i < count; ++i) {
        double r = unit(rng) * total;
        int face = 0;
        for (; face < 5; ++face) {
          if (r < area[face / 2]) break;
          r -= area[face / 2];
        }
        const int axis = face / 2;
        const double sign = face % 2 == 0 ? 1.0 : -1.0;
        Eigen::Vector3d p;
        for (int k = 0; k < 3; ++k) p(k) = (unit(rng) * 2 - 1) * h[k];
        p(axis) = sign * h[axis];
        Eigen::Vector3d n = Eigen::Vector3d::Zero();
        n(axis) = sign;
        pts.col(i) = p.cast<Scalar>();
        nrm.col(i) = n.cast<Scalar>();
      }
      break;
    }
    case Primitive::Cylinder: {
      const double r = params.a;
      const double height = params.b;
      require(r > 0 && height > 0, ErrorKind::Argument, "cylinder dimensions must be positive");
      const double side = 2 * M_PI * r * height;
      const double cap = M_PI * r * r;
      for (int i = 0; i < count; ++i) {
        const double pick = unit(rng) * (side + 2 * cap);
        const double theta = unit(rng) * 2 * M_PI;
        Eigen::Vector3d p;
        Eigen::Vector3d n;
        if (pick < side) {
          p = {r * std::cos(theta), r * std::sin(theta), (unit(rng) - 0.5) * height};
          n = {std::cos(theta), std::sin(theta), 0.0};
        } else {
          const double rho = r * std::sqrt(unit(rng));
          const double sign = pick < side + cap ? 1.0 : -1.0;
          p = {rho * std::cos(theta), rho * std::sin(theta), sign * height / 2};
          n = {0.0, 0.0, sign};
        }
        pts.col(i) = p.cast<Scalar>();
        nrm.col(i) = n.cast<Scalar>();
      }
      break;
    }
    case Primitive::Sphere: {
      const double r = params.a;
      require(r > 0, ErrorKind::Argument, "sphere radius must be positive");
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int i = 0; i < count; ++i) {
        Eigen::Vector3d d;
        do {
          d = {gauss(rng), gauss(rng), gauss(rng)};
        } while (d.squaredNorm() < 1e-12);
        d.normalize();
        pts.col(i) = (r * d).cast<Scalar>();
        nrm.col(i) = d.cast<Scalar>();
      }
      break;
    }
  }
  return BasicPointCloud<Scalar>(std::move(pts), std::move(nrm));
}

/// Uniformly distributed rotation (Haar measure) drawn from a quaternion.
template <typename Scalar, typename Rng>
Mat3<Scalar> random_rotation(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  q.normalize();
  return q.toRotationMatrix().cast<Scalar>();
}

}  // namespace viewgrasp
