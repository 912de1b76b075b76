#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vlb/geometry.hpp"
#include "vlb/rng.hpp"
#include "vlb/route.hpp"

namespace vlb {

using Descriptor = Eigen::VectorXd;

struct Landmark {
  LandmarkId id = 0;
  Vec3 position = Vec3::Zero();
  Descriptor canonical_descriptor;
  Vec3 facing = Vec3::UnitX();  // unit surface normal, toward the road
};

/// Layout of the synthetic facades.
///
/// Facades are tiled with fixed-width modules, each an instance of one of a
/// small library of templates (landmark layout plus descriptors). Adjacent
/// modules repeat their neighbour's template with `repeat_probability`, the
/// way terraced houses repeat along a street; instances differ only by
/// `instance_sigma` descriptor noise.
struct FacadeParams {
  double near_offset = 8.0;
  double near_offset_jitter = 1.0;
  double near_height_min = 0.5;
  double near_height_max = 8.0;
  double far_fraction = 0.3;
  double far_offset_min = 15.0;
  double far_offset_max = 60.0;
  double far_height_min = 2.0;
  double far_height_max = 25.0;
  double module_width = 12.0;
  int template_count = 24;
  double repeat_probability = 0.8;
  double instance_sigma = 0.05;
  double min_clearance = 5.0;
};

struct WorldSpec {
  std::string route_shape = "town01";
  double landmark_density = 8.0;  // landmarks per meter of route, both sides
  std::uint64_t seed = 1;
  double corner_radius = 10.0;
  int descriptor_dim = 64;
  FacadeParams facade;
};

struct WorldMap {
  std::vector<Landmark> landmarks;
  Route route;
  std::uint64_t seed = 0;
  WorldSpec spec;

  const Landmark& landmark(LandmarkId id) const { return landmarks.at(id); }
};

/// Throws InvalidSpec for non-positive density or a degenerate route.
WorldMap generate_world(const WorldSpec& spec);

/// base * 0.5^k; the illumination schedule for sun intensity and elevation.
double condition_value(double base_value, int k);

struct EnvironmentCondition {
  int illumination_k = 0;
  std::optional<double> visual_range;  // meters; empty means no fog
  double camera_offset_z = 0.0;        // meters
  double camera_pitch_deg = 0.0;       // degrees, downward
  bool rain = false;

  /// Throws InvalidSpec when out of range.
  void validate() const;
};

struct DegradationModel {
  double dropout_max = 0.9;
  double descriptor_sigma_max = 0.2;
  double pixel_sigma = 0.5;
  double fog_falloff_fraction = 0.6;
  double view_angle_sigma_scale = 0.02;
  double rain_pixel_sigma = 0.3;  // added to pixel_sigma when it rains
  double max_range = 80.0;        // meters; features further away are too small to detect

  void validate() const;
  /// All degradation switched off.
  static DegradationModel none() { return {0.0, 0.0, 0.0, 0.6, 0.0, 0.0, 80.0}; }
};

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double speed = 0.0;

  Vec2 position() const { return {x, y}; }
};

struct VehicleParams {
  double wheelbase = 2.5;
  double max_acceleration = 3.0;  // m/s^2 at full throttle
  double max_steer = 0.6;         // radians
};

struct ControlCommand {
  double steer = 0.0;     // radians, positive turns left
  double throttle = 0.0;  // normalized [-1, 1]
};

/// Kinematic bicycle model, explicit Euler.
VehicleState step_vehicle(const VehicleState& state, const ControlCommand& control, double dt,
                          const VehicleParams& params = {});

enum class IncrementFrame {
  Body,  // expressed in the vehicle frame at the previous step
  Odom,  // expressed in the world-aligned odometry frame
};

struct OdometryIncrement {
  Vec2 delta_translation = Vec2::Zero();
  double delta_yaw = 0.0;
  IncrementFrame frame = IncrementFrame::Body;
};

/// Wheel odometry error model.
///
/// Each sensor instance draws a systematic error once (translation error as a
/// 2D fraction of distance travelled, heading error per meter) and adds a
/// small per-step random walk on top. Sigmas are per meter or per sqrt(meter).
struct OdometryNoiseModel {
  double position_drift_rate = 0.085;  // target mean |error| / distance
  double rotation_drift_rate = 0.4;    // target mean |heading error|, deg per meter
  double reference_distance = 100.0;   // meters at which the targets hold
  double step_length = 0.08;           // nominal meters per control step
  double position_bias_sigma = 0.0;    // per-axis sigma of the fractional bias
  double rotation_bias_sigma = 0.0;    // rad per meter
  double position_walk_sigma = 0.0;    // m per sqrt(m)
  double rotation_walk_sigma = 0.0;    // rad per sqrt(m)

  /// Random-walk sigmas of a single nominal step.
  double position_step_sigma() const;
  double rotation_step_sigma() const;
};

/// Share of the terminal error variance at the reference distance that is
/// carried by the per-step random walk rather than the systematic part.
inline constexpr double kOdometryWalkVarianceShare = 0.02;

/// Sigmas reproducing the target drift rates at the reference distance.
OdometryNoiseModel calibrate_odometry(double target_position_rate, double target_rotation_rate,
                                      double step_length, double reference_distance = 100.0);

struct OdometryBias {
  Vec2 translation = Vec2::Zero();  // fraction of distance, body frame
  double yaw_per_meter = 0.0;       // rad/m
};

OdometryBias draw_odometry_bias(const OdometryNoiseModel& model, RandomStream& rng);

/// Noisy increment between two true states, in the odometry frame.
OdometryIncrement sample_odometry(const VehicleState& truth_prev, const VehicleState& truth_curr,
                                  const OdometryNoiseModel& model, const OdometryBias& bias,
                                  RandomStream& rng);

/// Stateful sensor: one bias per instance, one stream per instance.
class WheelOdometry {
 public:
  WheelOdometry(const OdometryNoiseModel& model, RandomStream rng);
  OdometryIncrement sample(const VehicleState& truth_prev, const VehicleState& truth_curr);
  const OdometryBias& bias() const { return bias_; }

 private:
  OdometryNoiseModel model_;
  RandomStream rng_;
  OdometryBias bias_;
};

struct Detection {
  Vec2 pixel;
  Descriptor descriptor;
  LandmarkId debug_landmark_id = 0;  // evaluation only
};

struct QueryObservation {
  double timestamp = 0.0;
  std::vector<Detection> detections;
  Pose camera_pose_truth;  // evaluation only
};

/// Synthetic image: the set of landmarks the camera detects under the given
/// condition, with pixel and descriptor noise.
QueryObservation observe(const WorldMap& world, const Pose& camera_pose,
                         const CameraIntrinsics& intrinsics,
                         const EnvironmentCondition& condition,
                         const DegradationModel& degradation, RandomStream& rng,
                         double timestamp = 0.0);

/// Probability that a landmark at `distance` survives the fog.
double fog_survival(double distance, std::optional<double> visual_range, double falloff_fraction);

/// Probability that a detection survives illumination level k.
double illumination_survival(int k, double dropout_max);

struct CameraMount {
  double height = 1.5;      // meters above the road
  double offset_z = 0.0;    // extra elevation, meters
  double pitch_deg = 0.0;   // downward pitch, degrees
};

/// Camera pointing perpendicular to the right of travel, optionally raised and
/// pitched down.
Pose mounted_camera_pose(const VehicleState& vehicle, const CameraMount& mount);

/// Vehicle body pose (x forward, z up, at ground level) implied by a camera
/// pose and the mount; the inverse of mounted_camera_pose.
Pose vehicle_pose_from_camera(const Pose& camera_pose, const CameraMount& mount);

}  // namespace vlb
