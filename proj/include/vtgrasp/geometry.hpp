#pragma once

// Depth deprojection, camera-to-base transform chain, mask-guided cloud
// segmentation and top-down antipodal grasp estimation.
//
// Units: depth pixels are millimetres; every 3D point is in metres.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vtgrasp/error.hpp"
#include "vtgrasp/image.hpp"
#include "vtgrasp/object_class.hpp"

namespace vtgrasp::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::invalid_config, "focal lengths must be positive");
    if (width <= 0 || height <= 0) throw Error(ErrorCode::invalid_config, "image size must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
      throw Error(ErrorCode::invalid_config, "principal point outside the image");
    }
  }

  /// Inverse calibration matrix [1/fx 0 -cx/fx; 0 1/fy -cy/fy; 0 0 1].
  Mat3 inverse_matrix() const {
    Mat3 m;
    m << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return m;
  }
};

struct PixelDepth {
  double x = 0.0;
  double y = 0.0;
  double depth_mm = 0.0;
};

template <typename Frame>
struct Point3 {
  Vec3 xyz = Vec3::Zero();

  double x() const { return xyz.x(); }
  double y() const { return xyz.y(); }
  double z() const { return xyz.z(); }
};

struct CameraFrame {};
struct BaseFrame {};
using CameraPoint = Point3<CameraFrame>;
using BasePoint = Point3<BaseFrame>;

/// Axis permutation taking (u, v, depth) ray components to the camera frame,
/// so the optical axis becomes x: [[0,0,1],[1,0,0],[0,1,0]].
inline Mat3 ray_permutation() {
  Mat3 r;
  r << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  return r;
}

inline void require_in_bounds(double x, double y, const CameraIntrinsics& k) {
  if (!(x >= 0.0 && x < k.width && y >= 0.0 && y < k.height)) {
    throw Error(ErrorCode::usage, "pixel outside image bounds");
  }
}

inline CameraPoint deproject(const PixelDepth& p, const CameraIntrinsics& k) {
  if (!(p.depth_mm > 0.0)) throw Error(ErrorCode::invalid_depth, "depth must be positive");
  require_in_bounds(p.x, p.y, k);
  const double d = p.depth_mm;
  const double u = (p.x - k.cx) / k.fx * d;
  const double v = (p.y - k.cy) / k.fy * d;
  return {Vec3(d, u, v) / 1000.0};
}

/// Inverse of deproject: camera point (m) back to pixel and depth (mm).
inline PixelDepth project(const CameraPoint& c, const CameraIntrinsics& k) {
  const Vec3 mm = c.xyz * 1000.0;
  const double d = mm.x();
  if (!(d > 0.0)) throw Error(ErrorCode::invalid_depth, "point is behind the camera");
  return {mm.y() / d * k.fx + k.cx, mm.z() / d * k.fy + k.cy, d};
}

/// Rigid homogeneous transform with validated rotation block.
class RigidTransform {
 public:
  RigidTransform() = default;

  static RigidTransform from_rotation_translation(const Mat3& r, const Vec3& t, double tol = 1e-9) {
    check_rotation(r, tol);
    RigidTransform out;
    out.m_.setIdentity();
    out.m_.topLeftCorner<3, 3>() = r;
    out.m_.topRightCorner<3, 1>() = t;
    return out;
  }

  static RigidTransform from_matrix(const Mat4& m, double tol = 1e-9) {
    const Eigen::RowVector4d bottom = m.row(3);
    if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tol) {
      throw Error(ErrorCode::invalid_config, "homogeneous transform bottom row must be [0 0 0 1]");
    }
    return from_rotation_translation(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>(), tol);
  }

  static RigidTransform identity() { return {}; }

  const Mat4& matrix() const noexcept { return m_; }
  Mat3 rotation() const { return m_.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return m_.topRightCorner<3, 1>(); }

  Vec3 apply(const Vec3& p) const { return rotation() * p + translation(); }

  RigidTransform inverse() const {
    RigidTransform out;
    out.m_.setIdentity();
    out.m_.topLeftCorner<3, 3>() = rotation().transpose();
    out.m_.topRightCorner<3, 1>() = -(rotation().transpose() * translation());
    return out;
  }

  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.m_ = a.m_ * b.m_;
    return out;
  }

 private:
  static void check_rotation(const Mat3& r, double tol) {
    if (!r.allFinite()) throw Error(ErrorCode::invalid_config, "rotation has non-finite entries");
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) {
      throw Error(ErrorCode::invalid_config, "rotation is not orthonormal");
    }
    if (std::abs(r.determinant() - 1.0) > tol) throw Error(ErrorCode::invalid_config, "rotation determinant is not +1");
  }

  Mat4 m_ = Mat4::Identity();
};

using EndEffectorPose = RigidTransform;   // R(q), p(q) from forward kinematics
using HandEyeTransform = RigidTransform;  // camera -> end-effector

inline BasePoint camera_to_base(const CameraPoint& c, const EndEffectorPose& ee, const HandEyeTransform& hand_eye) {
  const Eigen::Vector4d h(c.x(), c.y(), c.z(), 1.0);
  const Eigen::Vector4d b = ee.matrix() * hand_eye.matrix() * h;
  return {b.head<3>()};
}

// --- segmentation ----------------------------------------------------------

struct SegmentedCloud {
  std::vector<CameraPoint> points;
  ObjectClass label = ObjectClass::plastic;
  std::string mask_id;
  std::size_t masked_pixels = 0;
  std::size_t dropped_invalid = 0;

  double valid_fraction() const {
    return masked_pixels == 0 ? 0.0 : static_cast<double>(points.size()) / static_cast<double>(masked_pixels);
  }
};

/// Deprojects every masked pixel with a depth return; pixels with depth 0 are dropped.
inline SegmentedCloud segment_cloud(const GrayImage& mask, const DepthImage& depth, const CameraIntrinsics& k,
                                    ObjectClass label, std::string mask_id = {}) {
  require_same_shape(mask, depth, "segment_cloud");
  k.validate();
  if (mask.width() > k.width || mask.height() > k.height) {
    throw Error(ErrorCode::structural, "segment_cloud: image larger than the calibrated sensor");
  }
  SegmentedCloud cloud;
  cloud.label = label;
  cloud.mask_id = std::move(mask_id);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      ++cloud.masked_pixels;
      const std::uint16_t d = depth(x, y);
      if (d == 0) {
        ++cloud.dropped_invalid;
        continue;
      }
      cloud.points.push_back(deproject({static_cast<double>(x), static_cast<double>(y), static_cast<double>(d)}, k));
    }
  }
  if (cloud.points.empty()) throw Error(ErrorCode::empty_cloud, "no masked pixel has a valid depth");
  return cloud;
}

// --- grasp estimation ------------------------------------------------------

struct GraspOptions {
  double max_opening_mm = 140.0;
  double slab_fraction = 0.05;       // slab half-width relative to major-axis extent
  std::size_t min_points = 50;
  double contact_tolerance_mm = 1.0;  // band treated as "extremal" along the closing axis
  Vec3 up = Vec3::UnitZ();
};

struct GraspCandidate {
  Vec3 p1 = Vec3::Zero();
  Vec3 p2 = Vec3::Zero();
  Vec3 approach = -Vec3::UnitZ();
  double opening_required_mm = 0.0;
  Vec3 centroid = Vec3::Zero();
  Vec3 major_axis = Vec3::UnitX();
  Vec3 closing_axis = Vec3::UnitY();

  Vec3 midpoint() const { return 0.5 * (p1 + p2); }
};

/// Top-down antipodal grasp on a segmented cloud. The cutting plane passes
/// through the centroid perpendicular to the dominant horizontal axis; the
/// contact pair is extremal along the horizontal closing axis within the slab,
/// taking the candidate nearest the closing line through the centroid.
inline GraspCandidate compute_grasp(const std::vector<Vec3>& points, const GraspOptions& opt = {}) {
  if (points.size() < opt.min_points) {
    throw Error(ErrorCode::degenerate_geometry, "grasp estimation needs at least " + std::to_string(opt.min_points) +
                                                    " points, got " + std::to_string(points.size()));
  }
  const Vec3 up = opt.up.normalized();
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());

  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) cov += (p - c) * (p - c).transpose();
  cov /= static_cast<double>(points.size());
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues();  // ascending
  if (!(ev(2) > 1e-14) || ev(1) <= 1e-9 * ev(2)) {
    throw Error(ErrorCode::degenerate_geometry, "cloud second moments have rank < 2");
  }

  // Horizontal basis and 2x2 moment analysis in the plane perpendicular to up.
  Vec3 e1 = up.unitOrthogonal();
  Vec3 e2 = up.cross(e1);
  Eigen::Matrix2d hcov = Eigen::Matrix2d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector2d q((p - c).dot(e1), (p - c).dot(e2));
    hcov += q * q.transpose();
  }
  hcov /= static_cast<double>(points.size());
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> heig(hcov);
  if (!(heig.eigenvalues()(1) > 1e-14)) {
    throw Error(ErrorCode::degenerate_geometry, "cloud has no horizontal extent");
  }
  const Eigen::Vector2d m = heig.eigenvectors().col(1);
  Vec3 major = (m.x() * e1 + m.y() * e2).normalized();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(major(i)) > 1e-12) {
      if (major(i) < 0) major = -major;
      break;
    }
  }
  const Vec3 closing = up.cross(major).normalized();

  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  for (const auto& p : points) {
    const double a = (p - c).dot(major);
    amin = std::min(amin, a);
    amax = std::max(amax, a);
  }
  const double half_width = opt.slab_fraction * (amax - amin);

  std::vector<const Vec3*> slab;
  double smin = std::numeric_limits<double>::infinity(), smax = -smin;
  for (const auto& p : points) {
    if (std::abs((p - c).dot(major)) > half_width) continue;
    slab.push_back(&p);
    const double s = (p - c).dot(closing);
    smin = std::min(smin, s);
    smax = std::max(smax, s);
  }
  if (slab.size() < 2) throw Error(ErrorCode::degenerate_geometry, "cutting slab holds fewer than 2 points");

  const double tol = opt.contact_tolerance_mm / 1000.0;
  auto pick = [&](bool low) {
    const Vec3* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const Vec3* p : slab) {
      const Vec3 r = *p - c;
      const double s = r.dot(closing);
      if (low ? s > smin + tol : s < smax - tol) continue;
      const double off_line = (r - s * closing).squaredNorm();
      if (off_line < best_d) {
        best_d = off_line;
        best = p;
      }
    }
    return *best;
  };

  GraspCandidate g;
  g.p1 = pick(true);
  g.p2 = pick(false);
  g.approach = -up;
  g.centroid = c;
  g.major_axis = major;
  g.closing_axis = closing;
  g.opening_required_mm = (g.p1 - g.p2).norm() * 1000.0;
  if (g.opening_required_mm > opt.max_opening_mm) {
    throw Error(ErrorCode::object_too_wide, "required opening " + std::to_string(g.opening_required_mm) +
                                                " mm exceeds " + std::to_string(opt.max_opening_mm) + " mm");
  }
  return g;
}

/// Uses the cloud's camera-frame coordinates directly; `opt.up` must be the
/// vertical expressed in that frame.
inline GraspCandidate compute_grasp(const SegmentedCloud& cloud, const GraspOptions& opt = {}) {
  std::vector<Vec3> pts;
  pts.reserve(cloud.points.size());
  for (const auto& p : cloud.points) pts.push_back(p.xyz);
  return compute_grasp(pts, opt);
}

/// Staging point above the grasp midpoint along the approach direction.
inline Vec3 staging_point(const GraspCandidate& g, double offset_m = 0.100) {
  return g.midpoint() - offset_m * g.approach;
}

// --- workspace -------------------------------------------------------------

/// Axis-aligned box in the base frame; bounds are inclusive.
struct Workspace {
  double x_min = 0.2, x_max = 0.8;
  double y_min = -0.25, y_max = 0.25;
  double z_min = -0.05, z_max = 0.30;

  static Workspace centered(double cx, double cy, double size_x = 0.600, double size_y = 0.500,
                            double z_min = -0.05, double z_max = 0.30) {
    return {cx - size_x / 2, cx + size_x / 2, cy - size_y / 2, cy + size_y / 2, z_min, z_max};
  }

  Vec3 center() const { return {(x_min + x_max) / 2, (y_min + y_max) / 2, (z_min + z_max) / 2}; }
};

inline bool check_workspace(const BasePoint& p, const Workspace& ws) {
  return p.x() >= ws.x_min && p.x() <= ws.x_max && p.y() >= ws.y_min && p.y() <= ws.y_max && p.z() >= ws.z_min &&
         p.z() <= ws.z_max;
}

}  // namespace vtgrasp::geometry
