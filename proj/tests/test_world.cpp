#include <cmath>
#include <numbers>

#include "doctest.h"
#include "vlb/error.hpp"
#include "vlb/world.hpp"

using namespace vlb;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

struct DriftStats {
  double mean_position_error = 0.0;
  double mean_abs_yaw_error = 0.0;
};

// Dead reckoning along a straight line of `distance` meters at 4 m/s, 50 Hz.
DriftStats dead_reckon(const OdometryNoiseModel& model, int runs, double distance,
                       std::uint64_t seed) {
  const double dt = 0.02;
  const double speed = 4.0;
  const int steps = static_cast<int>(std::lround(distance / (speed * dt)));
  DriftStats stats;
  for (int r = 0; r < runs; ++r) {
    WheelOdometry odom(model, RandomStream(seed, StreamPurpose::Odometry, r));
    VehicleState truth{0, 0, 0, speed};
    Vec2 est = Vec2::Zero();
    double est_yaw = 0.0;
    for (int i = 0; i < steps; ++i) {
      VehicleState next = truth;
      next.x += speed * dt;
      const OdometryIncrement inc = odom.sample(truth, next);
      est += inc.delta_translation;
      est_yaw += inc.delta_yaw;
      truth = next;
    }
    stats.mean_position_error += (est - truth.position()).norm();
    stats.mean_abs_yaw_error += std::abs(est_yaw - truth.yaw);
  }
  stats.mean_position_error /= runs;
  stats.mean_abs_yaw_error /= runs;
  return stats;
}

// Simple world: a single straight route with a wall of landmarks to the right.
WorldMap straight_world(int landmarks_per_side = 200) {
  WorldSpec spec;
  spec.route_shape = "straight:200";
  spec.landmark_density = landmarks_per_side / 100.0;
  spec.seed = 5;
  return generate_world(spec);
}

}  // namespace

TEST_CASE("condition value halves per level") {
  CHECK(condition_value(1.0, 0) == 1.0);
  CHECK(condition_value(0.4 * kPi, 1) == doctest::Approx(0.2 * kPi).epsilon(1e-15));
  CHECK(condition_value(1.0, 10) == doctest::Approx(9.765625e-4).epsilon(1e-15));
}

TEST_CASE("route presets and grammar") {
  const Route town01 = build_route("town01");
  CHECK(std::abs(town01.total_length() - 1200.0) < 12.0);
  const Route town10 = build_route("town10");
  CHECK(std::abs(town10.total_length() - 500.0) < 10.0);
  const Route straight = build_route("straight:100");
  CHECK(straight.total_length() == doctest::Approx(100.0).epsilon(1e-12));

  // Five 90 degree turns in the long preset: final heading is rotated by 90.
  const double final_heading = town01.waypoints().back().heading;
  CHECK(std::abs(std::abs(wrap_angle(final_heading)) - kPi / 2) < 1e-6);

  // total_length equals the summed polyline length.
  double sum = 0.0;
  const auto& wps = town01.waypoints();
  for (std::size_t i = 1; i < wps.size(); ++i) sum += (wps[i].position - wps[i - 1].position).norm();
  CHECK(std::abs(sum - town01.total_length()) < 1e-6);

  CHECK_THROWS_AS(build_route("100,L"), Error);
  CHECK_THROWS_AS(build_route("abc"), Error);
  CHECK_THROWS_AS(build_route("5,L,100"), Error);
}

TEST_CASE("route projection signs lateral offset") {
  const Route r = build_route("straight:100");
  const auto left = r.project(Vec2(30, 2));
  CHECK(left.arc_length == doctest::Approx(30.0));
  CHECK(left.lateral == doctest::Approx(2.0));
  const auto right = r.project(Vec2(30, -1.5));
  CHECK(right.lateral == doctest::Approx(-1.5));
  CHECK(r.point_at(42.5).position.x() == doctest::Approx(42.5));
}

TEST_CASE("generate_world is deterministic and well formed") {
  WorldSpec spec;
  spec.seed = 3;
  const WorldMap a = generate_world(spec);
  const WorldMap b = generate_world(spec);
  REQUIRE(a.landmarks.size() == b.landmarks.size());
  for (std::size_t i = 0; i < a.landmarks.size(); ++i) {
    CHECK(a.landmarks[i].id == i);
    CHECK(a.landmarks[i].position == b.landmarks[i].position);
    CHECK(a.landmarks[i].canonical_descriptor == b.landmarks[i].canonical_descriptor);
    CHECK(std::abs(a.landmarks[i].canonical_descriptor.norm() - 1.0) < 1e-9);
    CHECK(std::abs(a.landmarks[i].facing.norm() - 1.0) < 1e-12);
    CHECK(a.route.project(a.landmarks[i].position.head<2>()).distance >= spec.facade.min_clearance);
  }
  CHECK(std::abs(a.route.total_length() - 1200.0) < 12.0);

  spec.seed = 4;
  const WorldMap c = generate_world(spec);
  CHECK(c.landmarks.front().canonical_descriptor != a.landmarks.front().canonical_descriptor);
}

TEST_CASE("landmark count follows density") {
  WorldSpec spec;
  spec.route_shape = "straight:500";
  spec.landmark_density = 2.0;
  const WorldMap w = generate_world(spec);
  const double n = static_cast<double>(w.landmarks.size());
  CHECK(std::abs(n - 1000.0) < 3.0 * std::sqrt(1000.0));
}

TEST_CASE("facings point toward the road") {
  const WorldMap w = straight_world();
  for (const Landmark& lm : w.landmarks) {
    const auto proj = w.route.project(lm.position.head<2>());
    const Vec2 foot = w.route.point_at(proj.arc_length).position;
    const Vec2 to_road = (foot - lm.position.head<2>()).normalized();
    CHECK(lm.facing.head<2>().dot(to_road) > 0.99);
  }
}

TEST_CASE("generate_world rejects bad specs") {
  WorldSpec spec;
  spec.landmark_density = 0.0;
  CHECK_THROWS_AS(generate_world(spec), Error);
  spec.landmark_density = -1.0;
  try {
    generate_world(spec);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSpec);
  }
}

TEST_CASE("step_vehicle kinematics") {
  VehicleParams params;
  const VehicleState s{1.0, 2.0, 0.3, 4.0};
  const VehicleState straight = step_vehicle(s, {0.0, 0.0}, 0.5, params);
  CHECK(straight.x == doctest::Approx(1.0 + 2.0 * std::cos(0.3)));
  CHECK(straight.y == doctest::Approx(2.0 + 2.0 * std::sin(0.3)));
  CHECK(straight.yaw == 0.3);
  CHECK(straight.speed == 4.0);

  const VehicleState parked{1.0, 2.0, 0.3, 0.0};
  const VehicleState still = step_vehicle(parked, {0.5, 0.0}, 0.5, params);
  CHECK(still.x == parked.x);
  CHECK(still.y == parked.y);
  CHECK(still.yaw == parked.yaw);

  const VehicleState turned = step_vehicle({0, 0, 0, 4.0}, {0.1, 0.0}, 0.1, params);
  CHECK(turned.yaw == doctest::Approx(4.0 * std::tan(0.1) / 2.5 * 0.1).epsilon(1e-14));

  const VehicleState braking = step_vehicle({0, 0, 0, 0.1}, {0.0, -1.0}, 0.5, params);
  CHECK(braking.speed == 0.0);
  const VehicleState accel = step_vehicle({0, 0, 0, 1.0}, {0.0, 0.5}, 0.1, params);
  CHECK(accel.speed == doctest::Approx(1.0 + 0.5 * 3.0 * 0.1));
}

TEST_CASE("odometry with zero sigmas is exact") {
  const OdometryNoiseModel model = calibrate_odometry(0.0, 0.0, 0.08);
  CHECK(model.position_bias_sigma == 0.0);
  CHECK(model.position_walk_sigma == 0.0);
  CHECK(model.rotation_bias_sigma == 0.0);
  CHECK(model.rotation_walk_sigma == 0.0);
  RandomStream rng(1, StreamPurpose::Test);
  const OdometryBias bias = draw_odometry_bias(model, rng);
  const VehicleState a{3.0, -1.0, 0.7, 4.0};
  const VehicleState b{3.2, -0.9, 0.75, 4.0};
  const OdometryIncrement inc = sample_odometry(a, b, model, bias, rng);
  CHECK((inc.delta_translation - (b.position() - a.position())).norm() < 1e-15);
  CHECK(inc.delta_yaw == doctest::Approx(0.05).epsilon(1e-14));
}

TEST_CASE("odometry calibration reproduces target drift") {
  const OdometryNoiseModel model = calibrate_odometry(0.085, 0.4, 0.08);
  const DriftStats s = dead_reckon(model, 1000, 100.0, 17);
  CHECK(std::abs(s.mean_position_error - 8.5) < 1.0);
  CHECK(std::abs(s.mean_abs_yaw_error / kDeg - 40.0) < 5.0);
  CHECK(std::abs(s.mean_position_error / 8.5 - 1.0) < 0.12);
  CHECK(std::abs(s.mean_abs_yaw_error / kDeg / 40.0 - 1.0) < 0.12);
}

TEST_CASE("odometry walk sigma scales with sqrt of step length") {
  const OdometryNoiseModel a = calibrate_odometry(0.085, 0.4, 0.08);
  const OdometryNoiseModel b = calibrate_odometry(0.085, 0.4, 0.16);
  CHECK(b.position_step_sigma() / a.position_step_sigma() == doctest::Approx(std::sqrt(2.0)));
  CHECK(b.rotation_step_sigma() / a.rotation_step_sigma() == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("dead-reckoning error grows linearly with distance") {
  // Systematic error dominates, so doubling the distance nearly doubles the
  // error; the random-walk share only lowers the ratio slightly.
  const OdometryNoiseModel model = calibrate_odometry(0.085, 0.4, 0.08);
  const DriftStats near = dead_reckon(model, 400, 50.0, 23);
  const DriftStats far = dead_reckon(model, 400, 100.0, 23);
  const double ratio = far.mean_position_error / near.mean_position_error;
  CHECK(ratio > 1.8);
  CHECK(ratio < 2.1);
}

TEST_CASE("pristine observation is an exact projection") {
  const WorldMap w = straight_world();
  const CameraIntrinsics k;
  const Pose cam = mounted_camera_pose({50, 0, 0, 4}, {});
  DegradationModel none = DegradationModel::none();
  RandomStream r1(1, StreamPurpose::Observation);
  RandomStream r2(2, StreamPurpose::Observation);
  const QueryObservation a = observe(w, cam, k, {}, none, r1);
  const QueryObservation b = observe(w, cam, k, {}, none, r2);
  REQUIRE(!a.detections.empty());
  REQUIRE(a.detections.size() == b.detections.size());

  std::size_t expected = 0;
  for (const Landmark& lm : w.landmarks) {
    const auto px = project(cam, k, lm.position);
    const bool in_range = (lm.position - cam.translation()).norm() <= none.max_range;
    if (px && in_range && lm.facing.dot(cam.translation() - lm.position) > 0.0) ++expected;
  }
  CHECK(a.detections.size() == expected);
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    const Detection& d = a.detections[i];
    const Landmark& lm = w.landmark(d.debug_landmark_id);
    const auto px = project(cam, k, lm.position);
    REQUIRE(px);
    CHECK((d.pixel - *px).norm() < 1e-9);
    CHECK(d.descriptor == lm.canonical_descriptor);
    CHECK(d.pixel == b.detections[i].pixel);
  }
}

TEST_CASE("fog cuts off beyond the visual range") {
  CHECK(fog_survival(50.0, 10.0, 0.6) == 0.0);
  CHECK(fog_survival(5.0, 10.0, 0.6) == 1.0);
  CHECK(fog_survival(8.0, 10.0, 0.6) == doctest::Approx(0.5));
  CHECK(fog_survival(500.0, std::nullopt, 0.6) == 1.0);

  const WorldMap w = straight_world();
  const CameraIntrinsics k;
  EnvironmentCondition fog;
  fog.visual_range = 10.0;
  const Pose cam = mounted_camera_pose({50, 0, 0, 4}, {});
  for (int t = 0; t < 50; ++t) {
    RandomStream rng(9, StreamPurpose::Observation, t);
    const QueryObservation obs = observe(w, cam, k, fog, DegradationModel{}, rng);
    for (const Detection& d : obs.detections) {
      CHECK((w.landmark(d.debug_landmark_id).position - cam.translation()).norm() < 10.0);
    }
  }
}

TEST_CASE("illumination dropout matches the Bernoulli expectation") {
  const WorldMap w = straight_world();
  const CameraIntrinsics k;
  const Pose cam = mounted_camera_pose({50, 0, 0, 4}, {});
  DegradationModel deg = DegradationModel::none();
  deg.dropout_max = 0.9;
  EnvironmentCondition dark;
  dark.illumination_k = 10;
  std::size_t bright_count = 0;
  std::size_t dark_count = 0;
  for (int t = 0; t < 1000; ++t) {
    RandomStream r(4, StreamPurpose::Observation, t);
    bright_count += observe(w, cam, k, {}, deg, r).detections.size();
    dark_count += observe(w, cam, k, dark, deg, r).detections.size();
  }
  const double fraction = static_cast<double>(dark_count) / bright_count;
  CHECK(std::abs(fraction - (1.0 - 0.9 * (1.0 - std::pow(0.5, 10)))) < 0.02);
}

TEST_CASE("detection probability is monotone in k and v") {
  const WorldMap w = straight_world();
  const CameraIntrinsics k;
  const Pose cam = mounted_camera_pose({50, 0, 0, 4}, {});
  const DegradationModel deg;
  auto mean_count = [&](const EnvironmentCondition& c) {
    double total = 0.0;
    for (int t = 0; t < 1000; ++t) {
      RandomStream r(8, StreamPurpose::Observation, t);
      total += static_cast<double>(observe(w, cam, k, c, deg, r).detections.size());
    }
    return total / 1000.0;
  };
  double previous = 1e18;
  for (int level = 0; level <= 10; level += 2) {
    EnvironmentCondition c;
    c.illumination_k = level;
    const double m = mean_count(c);
    // 3 sigma band on the mean of 1000 binomial-ish counts.
    CHECK(m <= previous + 3.0 * std::sqrt(std::max(previous, 1.0) / 1000.0));
    previous = m;
  }
  previous = 0.0;
  for (double v : {10.0, 30.0, 60.0, 90.0}) {
    EnvironmentCondition c;
    c.visual_range = v;
    const double m = mean_count(c);
    CHECK(m >= previous - 3.0 * std::sqrt(std::max(previous, 1.0) / 1000.0));
    previous = m;
  }
}

TEST_CASE("descriptor noise grows with darkness") {
  const WorldMap w = straight_world();
  const CameraIntrinsics k;
  const Pose cam = mounted_camera_pose({50, 0, 0, 4}, {});
  DegradationModel deg;
  deg.dropout_max = 0.0;
  auto mean_similarity = [&](int level) {
    EnvironmentCondition c;
    c.illumination_k = level;
    RandomStream r(2, StreamPurpose::Observation);
    const QueryObservation obs = observe(w, cam, k, c, deg, r);
    double s = 0.0;
    for (const Detection& d : obs.detections) {
      CHECK(std::abs(d.descriptor.norm() - 1.0) < 1e-9);
      CHECK(k.contains(d.pixel));
      s += d.descriptor.dot(w.landmark(d.debug_landmark_id).canonical_descriptor);
    }
    return s / static_cast<double>(obs.detections.size());
  };
  CHECK(mean_similarity(0) > mean_similarity(3));
  CHECK(mean_similarity(3) > mean_similarity(10));
}

TEST_CASE("condition validation") {
  EnvironmentCondition c;
  c.illumination_k = 11;
  CHECK_THROWS_AS(c.validate(), Error);
  c.illumination_k = 3;
  c.visual_range = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.visual_range = 30.0;
  c.camera_pitch_deg = 90.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.camera_pitch_deg = 40.0;
  CHECK_NOTHROW(c.validate());
  DegradationModel d;
  d.dropout_max = 1.5;
  CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("camera mount geometry") {
  const Pose base = mounted_camera_pose({0, 0, 0, 0}, {});
  const Mat3 r = base.rotation_matrix();
  CHECK((r.col(2) - Vec3(0, -1, 0)).norm() < 1e-12);  // looking right of +x travel
  CHECK((r.col(1) - Vec3(0, 0, -1)).norm() < 1e-12);  // image down is world down
  CHECK(base.translation().z() == doctest::Approx(1.5));

  CameraMount raised;
  raised.offset_z = 7.0;
  raised.pitch_deg = 35.0;
  const Pose p = mounted_camera_pose({0, 0, 0, 0}, raised);
  CHECK(p.translation().z() == doctest::Approx(8.5));
  const Vec3 axis = p.rotation_matrix().col(2);
  CHECK(std::asin(-axis.z()) / kDeg == doctest::Approx(35.0));
  CHECK(axis.x() == doctest::Approx(0.0));

  // Yaw equivariance.
  const double alpha = 0.8;
  const Pose q = mounted_camera_pose({0, 0, alpha, 0}, raised);
  const Mat3 expected = yaw_rotation(alpha) * p.rotation_matrix();
  CHECK((q.rotation_matrix() - expected).norm() < 1e-12);
}
