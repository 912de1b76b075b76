#include "vlb/episode.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "vlb/error.hpp"
#include "vlb/persistence.hpp"

namespace vlb {

namespace {

constexpr std::uint32_t kReferenceEpisode = 0xFFFFFFFFu;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 finalizer over a simple combination.
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull ^ (b << 32 | (c & 0xFFFFFFFFull));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct Capture {
  Pose camera_truth;
  std::optional<Pose> estimate;
};

Capture capture_and_localize(const ScenarioConfig& config, const Scene& scene,
                             const VehicleState& truth, const CameraMount& mount,
                             std::uint32_t episode, std::uint32_t capture_index, double t) {
  Capture c;
  c.camera_truth = mounted_camera_pose(truth, mount);
  RandomStream rng(config.seed, StreamPurpose::Observation, episode, capture_index);
  const QueryObservation obs = observe(scene.world, c.camera_truth, scene.gallery.intrinsics(),
                                       config.condition, config.degradation, rng, t);
  LocalizationParams params = config.stack.localization;
  params.ransac.seed = mix_seed(config.seed, episode, capture_index);
  if (const auto est = localize(scene.gallery, obs, params)) c.estimate = est->pose;
  return c;
}

std::vector<double> plan_arc_lengths(const std::vector<RoutePoint>& plan) {
  std::vector<double> s(plan.size(), 0.0);
  for (std::size_t i = 1; i < plan.size(); ++i)
    s[i] = s[i - 1] + (plan[i].position - plan[i - 1].position).norm();
  return s;
}

double time_limit(const ScenarioConfig& config, const Scene& scene) {
  return config.metrics.time_limit_factor * scene.world.route.total_length() /
             config.stack.target_speed +
         config.metrics.stall_timeout;
}

}  // namespace

std::string to_string(FailureCause cause) {
  return cause == FailureCause::Stall ? "stall" : "lateral_deviation";
}

Scene make_scene(WorldMap world, GalleryMap gallery, double waypoint_spacing) {
  if (gallery.world_seed() != world.seed)
    throw Error(ErrorCode::InvalidSpec, "gallery was built for a different world");
  for (const auto& [id, p] : gallery.points())
    if (id >= world.landmarks.size())
      throw Error(ErrorCode::InvalidSpec, "gallery references unknown landmarks");
  Scene scene{std::move(world), std::move(gallery), {}};
  scene.plan = plan_global(scene.world.route, waypoint_spacing);
  return scene;
}

Scene prepare_scene(const ScenarioConfig& config) {
  WorldMap world = config.world_file.empty() ? generate_world(config.world)
                                             : load_world(config.world_file);
  GalleryMap gallery;
  if (!config.gallery_file.empty() && std::filesystem::exists(config.gallery_file)) {
    gallery = load_gallery(config.gallery_file);
  } else {
    gallery = build_gallery(world, world.route, config.gallery, config.degradation);
  }
  return make_scene(std::move(world), std::move(gallery), config.stack.waypoint_spacing);
}

EpisodeResult run_episode(const ScenarioConfig& config, const Scene& scene, int episode_index,
                          bool use_vloc, const DisturbanceFn& disturbance) {
  const StackConfig& stack = config.stack;
  const MetricsConfig& metrics = config.metrics;
  const Route& route = scene.world.route;
  const double length = route.total_length();
  const double dt = 1.0 / stack.control_rate;
  const double capture_period = 1.0 / stack.localization_rate;
  const double log_period = 1.0 / metrics.trajectory_log_rate;
  const double limit = time_limit(config, scene);
  const auto episode = static_cast<std::uint32_t>(episode_index);
  const CameraMount mount = config.query_mount();
  const FusionConfig fusion = config.fusion_config();
  const Eigen::Matrix3d initial_cov = config.initial_covariance();
  const std::vector<double> plan_s = plan_arc_lengths(scene.plan);
  const Vec2 goal = scene.plan.back().position;

  SubgoalTracker tracker(scene.plan, stack.lookahead);
  PidController controller(stack.gains);
  WheelOdometry odometry(config.odometry_model(),
                         RandomStream(config.seed, StreamPurpose::Odometry, episode));

  EpisodeResult result;
  result.episode_index = episode_index;

  const RoutePoint start = scene.plan.front();
  VehicleState truth{start.position.x(), start.position.y(), start.heading, 0.0};
  EkfState ekf{Eigen::Vector3d(truth.x, truth.y, truth.yaw), initial_cov};
  double progress = 0.0;
  double stall_progress = 0.0;
  double stall_time = 0.0;
  double next_capture = 0.0;
  double next_log = 0.0;
  std::uint32_t capture_index = 0;

  struct Pending {
    double apply_time;
    std::size_t log_index;
    PlanarPose measurement;
  };
  std::deque<Pending> pending;

  for (long step = 0;; ++step) {
    const double t = static_cast<double>(step) * dt;
    if (t > limit) break;

    if (use_vloc && t + 1e-9 >= next_capture) {
      const Capture c = capture_and_localize(config, scene, truth, mount, episode, capture_index, t);
      LocalizationAttempt attempt{t, c.camera_truth, c.estimate, false, stack.localization_latency};
      result.localization_log.push_back(attempt);
      if (c.estimate) {
        const Pose body = vehicle_pose_from_camera(*c.estimate, mount);
        try {
          pending.push_back({t + stack.localization_latency, result.localization_log.size() - 1,
                             project_pose_to_plane(body)});
        } catch (const Error&) {
          // Vertical forward axis: unusable for the planar filter.
        }
      }
      ++capture_index;
      next_capture += capture_period;
    }
    while (!pending.empty() && pending.front().apply_time <= t + 1e-9) {
      const UpdateResult u = ekf_update(ekf, pending.front().measurement, fusion);
      ekf = u.state;
      result.localization_log[pending.front().log_index].accepted = u.accepted;
      pending.pop_front();
    }
    if (t + 1e-9 >= next_log) {
      result.trajectory_log.push_back({t, truth, ekf.mean});
      next_log += log_period;
    }

    const PlanarPose believed{ekf.mean.x(), ekf.mean.y(), ekf.mean.z()};
    const Subgoal sg = tracker.next(believed);
    const Vec2 target = sg.goal_reached ? goal : sg.waypoint;
    const ControlCommand cmd = controller.control(believed, truth.speed, target, stack.target_speed, dt);
    VehicleState next = step_vehicle(truth, cmd, dt, stack.vehicle);
    if (disturbance) {
      const double shift = disturbance(t);
      next.x += -std::sin(next.yaw) * shift;
      next.y += std::cos(next.yaw) * shift;
    }
    ekf = ekf_predict(ekf, odometry.sample(truth, next), fusion);
    truth = next;

    const double now = t + dt;
    const auto proj = route.project_window(truth.position(), progress - 10.0, progress + 10.0);
    progress = std::max(progress, proj.arc_length);
    if (progress >= stall_progress + metrics.stall_progress) {
      stall_progress = progress;
      stall_time = now;
    }

    std::optional<FailureCause> failure;
    if (proj.distance > metrics.failure_lateral_threshold)
      failure = FailureCause::LateralDeviation;
    else if (now - stall_time > metrics.stall_timeout)
      failure = FailureCause::Stall;

    if (failure) {
      result.failure_events.push_back({now, truth.position(), progress, *failure});
      ++result.reinit_count;
      if (result.reinit_count > metrics.max_reinits) {
        result.duration = now;
        return result;
      }
      // Back to the last planner waypoint behind the failure point.
      const auto it = std::upper_bound(plan_s.begin(), plan_s.end(), progress);
      const std::size_t wp = it == plan_s.begin() ? 0 : static_cast<std::size_t>(it - plan_s.begin()) - 1;
      const RoutePoint& p = scene.plan[wp];
      truth = {p.position.x(), p.position.y(), p.heading, 0.0};
      ekf = {Eigen::Vector3d(truth.x, truth.y, truth.yaw), initial_cov};
      controller.reset();
      tracker.reset(wp);
      pending.clear();
      progress = plan_s[wp];
      stall_progress = progress;
      stall_time = now;
      continue;
    }

    if ((truth.position() - goal).norm() <= stack.lookahead &&
        length - progress <= 2.0 * stack.lookahead) {
      result.completed = true;
      result.duration = now;
      return result;
    }
  }
  result.duration = limit;
  return result;
}

std::vector<LocalizationAttempt> run_reference_recall(const ScenarioConfig& config,
                                                      const Scene& scene) {
  const StackConfig& stack = config.stack;
  const double dt = 1.0 / stack.control_rate;
  const double capture_period = 1.0 / stack.localization_rate;
  const double limit = time_limit(config, scene);
  const CameraMount mount = config.query_mount();
  const Vec2 goal = scene.plan.back().position;
  const double length = scene.world.route.total_length();

  SubgoalTracker tracker(scene.plan, stack.lookahead);
  PidController controller(stack.gains);
  const RoutePoint start = scene.plan.front();
  VehicleState truth{start.position.x(), start.position.y(), start.heading, 0.0};
  std::vector<LocalizationAttempt> log;
  double next_capture = 0.0;
  std::uint32_t capture_index = 0;

  for (long step = 0;; ++step) {
    const double t = static_cast<double>(step) * dt;
    if (t > limit) break;
    if (t + 1e-9 >= next_capture) {
      const Capture c =
          capture_and_localize(config, scene, truth, mount, kReferenceEpisode, capture_index, t);
      log.push_back({t, c.camera_truth, c.estimate, false, stack.localization_latency});
      ++capture_index;
      next_capture += capture_period;
    }
    const PlanarPose pose{truth.x, truth.y, truth.yaw};
    const Subgoal sg = tracker.next(pose);
    if ((truth.position() - goal).norm() <= stack.lookahead &&
        length - tracker.progress() <= 2.0 * stack.lookahead)
      break;
    const Vec2 target = sg.goal_reached ? goal : sg.waypoint;
    truth = step_vehicle(truth, controller.control(pose, truth.speed, target, stack.target_speed, dt),
                         dt, stack.vehicle);
  }
  return log;
}

}  // namespace vlb
