#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "vlb/geometry.hpp"
#include "vlb/world.hpp"

namespace vlb {

/// Planar pose belief: (x, y, yaw) and its covariance.
struct EkfState {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
};

struct FusionConfig {
  Eigen::Matrix3d process_noise = Eigen::Matrix3d::Zero();  // added per predict
  // (0.5 m)^2 and (2 deg)^2
  Eigen::Matrix3d measurement_noise =
      Eigen::Vector3d(0.25, 0.25, std::pow(2.0 * std::numbers::pi / 180.0, 2)).asDiagonal();
  double outlier_gate = 20.0;  // meters, planar
};

/// Per-step process noise for an odometry step of `step_length` meters:
/// variance grows by (scale * rate)^2 per meter travelled.
Eigen::Matrix3d process_noise_from_odometry(const OdometryNoiseModel& model, double step_length,
                                            double scale = 1.0);

/// Symmetric within 1e-9 and no eigenvalue below -1e-12.
bool covariance_valid(const Eigen::Matrix3d& covariance);

EkfState ekf_predict(const EkfState& state, const OdometryIncrement& odom,
                     const FusionConfig& config);

struct PlanarPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

struct UpdateResult {
  EkfState state;
  bool accepted = false;
};

/// Identity-observation update with the planar outlier gate (Joseph form).
UpdateResult ekf_update(const EkfState& state, const PlanarPose& measurement,
                        const FusionConfig& config);

/// Translation x, y and the heading of the body x axis projected onto the
/// ground plane. Throws DegenerateOrientation when that axis is vertical.
PlanarPose project_pose_to_plane(const Pose& pose);

}  // namespace vlb
