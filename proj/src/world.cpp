#include "vlb/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vlb/error.hpp"

namespace vlb {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

Descriptor random_unit_descriptor(int dim, RandomStream& rng) {
  Descriptor d(dim);
  for (int i = 0; i < dim; ++i) d[i] = rng.normal();
  return d.normalized();
}

struct TemplateEntry {
  double along = 0.0;  // meters from the module start
  double offset = 0.0;  // meters from the road center
  double height = 0.0;
  Descriptor descriptor;
};

std::vector<TemplateEntry> make_template(const WorldSpec& spec, int per_module, int index) {
  const FacadeParams& f = spec.facade;
  RandomStream rng(spec.seed, StreamPurpose::WorldLayout, 1000u + static_cast<std::uint32_t>(index));
  std::vector<TemplateEntry> entries;
  entries.reserve(per_module);
  for (int i = 0; i < per_module; ++i) {
    TemplateEntry e;
    e.along = rng.uniform(0.0, f.module_width);
    if (rng.bernoulli(f.far_fraction)) {
      e.offset = rng.uniform(f.far_offset_min, f.far_offset_max);
      e.height = rng.uniform(f.far_height_min, f.far_height_max);
    } else {
      e.offset = f.near_offset + rng.uniform(-f.near_offset_jitter, f.near_offset_jitter);
      e.height = rng.uniform(f.near_height_min, f.near_height_max);
    }
    e.descriptor = random_unit_descriptor(spec.descriptor_dim, rng);
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace

double condition_value(double base_value, int k) { return base_value * std::pow(0.5, k); }

WorldMap generate_world(const WorldSpec& spec) {
  if (!(spec.landmark_density > 0.0))
    throw Error(ErrorCode::InvalidSpec, "landmark density must be positive");
  if (spec.descriptor_dim < 2) throw Error(ErrorCode::InvalidSpec, "descriptor dimension < 2");
  const FacadeParams& f = spec.facade;
  if (!(f.module_width > 0.0) || f.template_count < 1)
    throw Error(ErrorCode::InvalidSpec, "bad facade module parameters");

  WorldMap world;
  world.seed = spec.seed;
  world.spec = spec;
  world.route = build_route(spec.route_shape, spec.corner_radius);
  const Route& route = world.route;
  const double length = route.total_length();
  if (!(length > 0.0)) throw Error(ErrorCode::InvalidSpec, "route has zero length");

  // Landmarks per module and side; density counts both sides.
  const int per_module =
      std::max(1, static_cast<int>(std::lround(spec.landmark_density * f.module_width / 2.0)));
  std::vector<std::vector<TemplateEntry>> templates;
  templates.reserve(f.template_count);
  for (int t = 0; t < f.template_count; ++t) templates.push_back(make_template(spec, per_module, t));

  const int modules = static_cast<int>(std::ceil(length / f.module_width));
  for (int side_index = 0; side_index < 2; ++side_index) {
    const double side = side_index == 0 ? 1.0 : -1.0;  // +1 left of travel
    RandomStream layout(spec.seed, StreamPurpose::WorldLayout, 1u + side_index);
    int previous_template = -1;
    for (int m = 0; m < modules; ++m) {
      int tmpl = static_cast<int>(layout.uniform_index(static_cast<std::uint32_t>(f.template_count)));
      if (previous_template >= 0 && layout.bernoulli(f.repeat_probability)) tmpl = previous_template;
      previous_template = tmpl;

      RandomStream instance(spec.seed, StreamPurpose::WorldDescriptors,
                            static_cast<std::uint32_t>(side_index),
                            static_cast<std::uint32_t>(m));
      const double module_start = m * f.module_width;
      for (const TemplateEntry& e : templates[tmpl]) {
        Descriptor d = e.descriptor;
        for (int i = 0; i < d.size(); ++i) d[i] += f.instance_sigma * instance.normal();
        const double s = module_start + e.along;
        if (s >= length) continue;
        const RoutePoint rp = route.point_at(s);
        const Vec2 left(-std::sin(rp.heading), std::cos(rp.heading));
        const Vec2 xy = rp.position + side * e.offset * left;
        if (route.project(xy).distance < f.min_clearance) continue;
        Landmark lm;
        lm.id = static_cast<LandmarkId>(world.landmarks.size());
        lm.position = Vec3(xy.x(), xy.y(), e.height);
        lm.canonical_descriptor = d.normalized();
        lm.facing = Vec3(-side * left.x(), -side * left.y(), 0.0);
        world.landmarks.push_back(std::move(lm));
      }
    }
  }
  return world;
}

void EnvironmentCondition::validate() const {
  if (illumination_k < 0 || illumination_k > 10)
    throw Error(ErrorCode::InvalidSpec, "illumination k must be in [0, 10]");
  if (visual_range && !(*visual_range > 0.0))
    throw Error(ErrorCode::InvalidSpec, "visual range must be positive");
  if (!(camera_pitch_deg >= 0.0 && camera_pitch_deg < 90.0))
    throw Error(ErrorCode::InvalidSpec, "camera pitch must be in [0, 90)");
}

void DegradationModel::validate() const {
  if (dropout_max < 0.0 || dropout_max > 1.0 || descriptor_sigma_max < 0.0 || pixel_sigma < 0.0 ||
      view_angle_sigma_scale < 0.0 || rain_pixel_sigma < 0.0 || !(fog_falloff_fraction > 0.0) ||
      fog_falloff_fraction > 1.0 || !(max_range > 0.0))
    throw Error(ErrorCode::InvalidSpec, "degradation parameters out of range");
}

VehicleState step_vehicle(const VehicleState& state, const ControlCommand& control, double dt,
                          const VehicleParams& params) {
  const double steer = std::clamp(control.steer, -params.max_steer, params.max_steer);
  const double throttle = std::clamp(control.throttle, -1.0, 1.0);
  VehicleState next = state;
  next.x += state.speed * std::cos(state.yaw) * dt;
  next.y += state.speed * std::sin(state.yaw) * dt;
  next.yaw = wrap_angle(state.yaw + state.speed * std::tan(steer) / params.wheelbase * dt);
  next.speed = std::max(0.0, state.speed + throttle * params.max_acceleration * dt);
  return next;
}

double OdometryNoiseModel::position_step_sigma() const {
  return position_walk_sigma * std::sqrt(step_length);
}

double OdometryNoiseModel::rotation_step_sigma() const {
  return rotation_walk_sigma * std::sqrt(step_length);
}

OdometryNoiseModel calibrate_odometry(double target_position_rate, double target_rotation_rate,
                                      double step_length, double reference_distance) {
  if (target_position_rate < 0.0 || target_rotation_rate < 0.0 || !(step_length > 0.0) ||
      !(reference_distance > 0.0))
    throw Error(ErrorCode::InvalidSpec, "odometry targets must be non-negative");
  OdometryNoiseModel model;
  model.position_drift_rate = target_position_rate;
  model.rotation_drift_rate = target_rotation_rate;
  model.reference_distance = reference_distance;
  model.step_length = step_length;

  // Terminal error at distance L is Gaussian with per-axis variance
  // bias^2 L^2 + walk^2 L. Position error is 2D (mean norm = sqrt(pi/2) sd),
  // heading error 1D (mean |.| = sqrt(2/pi) sd).
  const double l = reference_distance;
  const double pos_sd = target_position_rate * l / std::sqrt(std::numbers::pi / 2.0);
  const double rot_sd = target_rotation_rate * kDegToRad * l / std::sqrt(2.0 / std::numbers::pi);
  const double share = kOdometryWalkVarianceShare;
  model.position_walk_sigma = std::sqrt(share / l) * pos_sd;
  model.position_bias_sigma = std::sqrt(1.0 - share) * pos_sd / l;
  model.rotation_walk_sigma = std::sqrt(share / l) * rot_sd;
  model.rotation_bias_sigma = std::sqrt(1.0 - share) * rot_sd / l;
  return model;
}

OdometryBias draw_odometry_bias(const OdometryNoiseModel& model, RandomStream& rng) {
  OdometryBias bias;
  bias.translation = Vec2(rng.normal(), rng.normal()) * model.position_bias_sigma;
  bias.yaw_per_meter = rng.normal() * model.rotation_bias_sigma;
  return bias;
}

OdometryIncrement sample_odometry(const VehicleState& truth_prev, const VehicleState& truth_curr,
                                  const OdometryNoiseModel& model, const OdometryBias& bias,
                                  RandomStream& rng) {
  const Eigen::Rotation2Dd to_world(truth_prev.yaw);
  const Vec2 world_delta = truth_curr.position() - truth_prev.position();
  const Vec2 body_delta = to_world.inverse() * world_delta;
  const double distance = body_delta.norm();
  const double true_dyaw = wrap_angle(truth_curr.yaw - truth_prev.yaw);

  // Always consume the same number of draws so streams stay aligned.
  const double n_x = rng.normal();
  const double n_y = rng.normal();
  const double n_yaw = rng.normal();
  const double walk = std::sqrt(distance);
  Vec2 noisy_body = body_delta + distance * bias.translation +
                    model.position_walk_sigma * walk * Vec2(n_x, n_y);
  const double noisy_dyaw =
      true_dyaw + distance * bias.yaw_per_meter + model.rotation_walk_sigma * walk * n_yaw;

  OdometryIncrement inc;
  inc.delta_translation = to_world * noisy_body;
  inc.delta_yaw = noisy_dyaw;
  inc.frame = IncrementFrame::Odom;
  return inc;
}

WheelOdometry::WheelOdometry(const OdometryNoiseModel& model, RandomStream rng)
    : model_(model), rng_(std::move(rng)), bias_(draw_odometry_bias(model_, rng_)) {}

OdometryIncrement WheelOdometry::sample(const VehicleState& truth_prev,
                                        const VehicleState& truth_curr) {
  return sample_odometry(truth_prev, truth_curr, model_, bias_, rng_);
}

double fog_survival(double distance, std::optional<double> visual_range, double falloff_fraction) {
  if (!visual_range) return 1.0;
  const double v = *visual_range;
  const double start = falloff_fraction * v;
  if (distance < start) return 1.0;
  if (distance >= v) return 0.0;
  return (v - distance) / (v - start);
}

double illumination_survival(int k, double dropout_max) {
  return 1.0 - dropout_max * (1.0 - std::pow(0.5, k));
}

QueryObservation observe(const WorldMap& world, const Pose& camera_pose,
                         const CameraIntrinsics& intrinsics,
                         const EnvironmentCondition& condition,
                         const DegradationModel& degradation, RandomStream& rng,
                         double timestamp) {
  QueryObservation obs;
  obs.timestamp = timestamp;
  obs.camera_pose_truth = camera_pose;

  const double darkness = 1.0 - std::pow(0.5, condition.illumination_k);
  const double keep_probability = illumination_survival(condition.illumination_k, degradation.dropout_max);
  const double pixel_sigma =
      degradation.pixel_sigma + (condition.rain ? degradation.rain_pixel_sigma : 0.0);
  const double descriptor_sigma_base = degradation.descriptor_sigma_max * darkness;
  const Mat3 world_to_camera = camera_pose.rotation_matrix().transpose();
  const Vec3 center = camera_pose.translation();

  for (const Landmark& lm : world.landmarks) {
    const Vec3 xc = world_to_camera * (lm.position - center);
    if (xc.z() <= 0.0) continue;
    const Vec2 pixel(intrinsics.focal_x * xc.x() / xc.z() + intrinsics.principal_x,
                     intrinsics.focal_y * xc.y() / xc.z() + intrinsics.principal_y);
    if (!intrinsics.contains(pixel)) continue;
    const Vec3 to_camera = center - lm.position;
    const double distance = to_camera.norm();
    if (distance > degradation.max_range) continue;
    const double cos_view = lm.facing.dot(to_camera) / distance;
    if (cos_view <= 0.0) continue;

    const double p_fog =
        fog_survival(distance, condition.visual_range, degradation.fog_falloff_fraction);
    if (p_fog <= 0.0) continue;
    if (p_fog < 1.0 && !rng.bernoulli(p_fog)) continue;
    if (keep_probability < 1.0 && !rng.bernoulli(keep_probability)) continue;

    Detection det;
    det.debug_landmark_id = lm.id;
    det.pixel = pixel;
    if (pixel_sigma > 0.0) {
      det.pixel += Vec2(rng.normal(), rng.normal()) * pixel_sigma;
      if (!intrinsics.contains(det.pixel)) continue;
    }
    const double view_angle = std::acos(std::min(1.0, cos_view));
    const double sigma = descriptor_sigma_base + degradation.view_angle_sigma_scale * view_angle;
    det.descriptor = lm.canonical_descriptor;
    if (sigma > 0.0) {
      for (int i = 0; i < det.descriptor.size(); ++i) det.descriptor[i] += sigma * rng.normal();
      det.descriptor.normalize();
    }
    obs.detections.push_back(std::move(det));
  }
  return obs;
}

Pose mounted_camera_pose(const VehicleState& vehicle, const CameraMount& mount) {
  const double theta = mount.pitch_deg * kDegToRad;
  const Vec3 forward(std::cos(vehicle.yaw), std::sin(vehicle.yaw), 0.0);
  const Vec3 right(std::sin(vehicle.yaw), -std::cos(vehicle.yaw), 0.0);
  const Vec3 axis = std::cos(theta) * right - std::sin(theta) * Vec3::UnitZ();
  const Vec3 image_x = -forward;
  const Vec3 image_y = axis.cross(image_x);
  Mat3 r;
  r.col(0) = image_x;
  r.col(1) = image_y;
  r.col(2) = axis;
  return Pose(Vec3(vehicle.x, vehicle.y, mount.height + mount.offset_z), r);
}

Pose vehicle_pose_from_camera(const Pose& camera_pose, const CameraMount& mount) {
  // Camera pose relative to the body frame of a vehicle at the origin.
  const Pose body_to_camera = mounted_camera_pose({}, mount);
  return camera_pose.compose(body_to_camera.inverse());
}

}  // namespace vlb
