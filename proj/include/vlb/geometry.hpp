#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace vlb {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using LandmarkId = std::uint32_t;

/// Rigid transform from a local frame into the world frame.
///
/// For cameras the local frame is x right, y down, z along the optical axis,
/// so `translation` is the camera center in world coordinates.
class Pose {
 public:
  Pose() : translation_(Vec3::Zero()), rotation_(Eigen::Quaterniond::Identity()) {}
  Pose(const Vec3& translation, const Eigen::Quaterniond& rotation)
      : translation_(translation), rotation_(rotation.normalized()) {}
  Pose(const Vec3& translation, const Mat3& rotation)
      : Pose(translation, Eigen::Quaterniond(rotation)) {}

  static Pose identity() { return {}; }

  const Vec3& translation() const { return translation_; }
  const Eigen::Quaterniond& rotation() const { return rotation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Pose inverse() const;
  /// this * other: apply `other` first, then this.
  Pose compose(const Pose& other) const;
  Vec3 transform(const Vec3& local) const { return rotation_ * local + translation_; }
  Vec3 inverse_transform(const Vec3& world) const {
    return rotation_.conjugate() * (world - translation_);
  }

  bool operator==(const Pose& other) const {
    return translation_ == other.translation_ && rotation_.coeffs() == other.rotation_.coeffs();
  }

 private:
  Vec3 translation_;
  Eigen::Quaterniond rotation_;
};

struct CameraIntrinsics {
  double focal_x = 400.0;
  double focal_y = 400.0;
  double principal_x = 400.0;
  double principal_y = 300.0;
  int width = 800;
  int height = 600;

  bool valid() const;
  bool contains(const Vec2& pixel) const {
    return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() < width && pixel.y() < height;
  }
  /// Unit bearing in the camera frame for a pixel.
  Vec3 bearing(const Vec2& pixel) const;
};

struct Correspondence2D3D {
  Vec2 pixel;
  Vec3 point;
  LandmarkId landmark_id = 0;
};

struct PoseError {
  double translation_error = 0.0;  // meters
  double rotation_error = 0.0;     // degrees
};

struct ViewObservation {
  Pose camera_pose;
  Vec2 pixel;
};

/// Pinhole projection; empty when the point is behind the camera or outside
/// the image.
std::optional<Vec2> project(const Pose& camera_pose, const CameraIntrinsics& intrinsics,
                            const Vec3& point);

/// Projection without the image-bounds test (depth must still be positive).
std::optional<Vec2> project_unbounded(const Pose& camera_pose,
                                      const CameraIntrinsics& intrinsics, const Vec3& point);

/// Least-squares point from two or more views with known poses.
/// Throws InsufficientObservations or DegenerateGeometry.
Vec3 triangulate(std::span<const ViewObservation> observations,
                 const CameraIntrinsics& intrinsics);

/// Minimal three-point absolute pose (Grunert). Throws DegenerateGeometry
/// for collinear points.
std::vector<Pose> solve_p3p(std::span<const Correspondence2D3D> correspondences,
                            const CameraIntrinsics& intrinsics);

struct RansacParams {
  double inlier_threshold_px = 4.0;
  int max_iterations = 1000;
  double confidence = 0.99;
  std::uint64_t seed = 0;
  int min_inliers = 4;
  int refine_max_iterations = 20;
  double refine_step_tolerance = 1e-10;
};

struct PnpResult {
  Pose pose;
  std::vector<std::size_t> inliers;  // indices into the input correspondences
};

/// Robust absolute pose: P3P hypotheses with a fourth point for
/// disambiguation, adaptive RANSAC, then Gauss-Newton on the inliers.
/// Throws InsufficientCorrespondences (< 4 inputs) or NoConsensus.
PnpResult ransac_pnp(std::span<const Correspondence2D3D> correspondences,
                     const CameraIntrinsics& intrinsics, const RansacParams& params);

/// Gauss-Newton refinement of a camera pose on reprojection error.
Pose refine_pose(const Pose& initial, std::span<const Correspondence2D3D> correspondences,
                 const CameraIntrinsics& intrinsics, int max_iterations = 20,
                 double step_tolerance = 1e-10);

double reprojection_error(const Pose& camera_pose, const CameraIntrinsics& intrinsics,
                          const Correspondence2D3D& correspondence);

PoseError pose_error(const Pose& estimate, const Pose& truth);

/// Rotation about the world z axis (up).
Eigen::Quaterniond yaw_rotation(double yaw);

}  // namespace vlb
