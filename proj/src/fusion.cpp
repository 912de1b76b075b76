#include "vlb/fusion.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "vlb/error.hpp"

namespace vlb {

Eigen::Matrix3d process_noise_from_odometry(const OdometryNoiseModel& model, double step_length,
                                            double scale) {
  const double pos_rate = scale * model.position_drift_rate;
  const double rot_rate = scale * model.rotation_drift_rate * std::numbers::pi / 180.0;
  const double ds = std::max(0.0, step_length);
  return Eigen::Vector3d(pos_rate * pos_rate * ds, pos_rate * pos_rate * ds, rot_rate * rot_rate * ds)
      .asDiagonal();
}

bool covariance_valid(const Eigen::Matrix3d& covariance) {
  if (!covariance.allFinite()) return false;
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(covariance, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -1e-12;
}

EkfState ekf_predict(const EkfState& state, const OdometryIncrement& odom,
                     const FusionConfig& config) {
  EkfState next = state;
  Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
  const double dx = odom.delta_translation.x();
  const double dy = odom.delta_translation.y();
  if (odom.frame == IncrementFrame::Body) {
    const double c = std::cos(state.mean.z());
    const double s = std::sin(state.mean.z());
    next.mean.x() += c * dx - s * dy;
    next.mean.y() += s * dx + c * dy;
    f(0, 2) = -s * dx - c * dy;
    f(1, 2) = c * dx - s * dy;
  } else {
    next.mean.x() += dx;
    next.mean.y() += dy;
  }
  next.mean.z() = wrap_angle(state.mean.z() + odom.delta_yaw);
  next.covariance = f * state.covariance * f.transpose() + config.process_noise;
  next.covariance = 0.5 * (next.covariance + next.covariance.transpose());
  return next;
}

UpdateResult ekf_update(const EkfState& state, const PlanarPose& measurement,
                        const FusionConfig& config) {
  const Eigen::Vector2d offset(measurement.x - state.mean.x(), measurement.y - state.mean.y());
  if (offset.norm() > config.outlier_gate) return {state, false};

  const Eigen::Vector3d innovation(offset.x(), offset.y(),
                                   wrap_angle(measurement.yaw - state.mean.z()));
  const Eigen::Matrix3d& p = state.covariance;
  const Eigen::Matrix3d s = p + config.measurement_noise;
  const Eigen::Matrix3d k = p * s.inverse();
  const Eigen::Matrix3d i_k = Eigen::Matrix3d::Identity() - k;

  UpdateResult out;
  out.accepted = true;
  out.state.mean = state.mean + k * innovation;
  out.state.mean.z() = wrap_angle(out.state.mean.z());
  out.state.covariance = i_k * p * i_k.transpose() + k * config.measurement_noise * k.transpose();
  out.state.covariance = 0.5 * (out.state.covariance + out.state.covariance.transpose());
  return out;
}

PlanarPose project_pose_to_plane(const Pose& pose) {
  const Vec3 forward = pose.rotation() * Vec3::UnitX();
  const double horizontal = forward.head<2>().norm();
  if (horizontal < 1e-6)
    throw Error(ErrorCode::DegenerateOrientation, "forward axis is vertical");
  return {pose.translation().x(), pose.translation().y(), std::atan2(forward.y(), forward.x())};
}

}  // namespace vlb
