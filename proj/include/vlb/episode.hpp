#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vlb/scenario.hpp"

namespace vlb {

/// World, gallery and global plan shared read-only by all episodes.
struct Scene {
  WorldMap world;
  GalleryMap gallery;
  std::vector<RoutePoint> plan;

  double route_length_km() const { return world.route.total_length() / 1000.0; }
};

/// Loads or generates the world and gallery named by the config. Throws
/// InvalidSpec when a loaded gallery does not belong to the world.
Scene prepare_scene(const ScenarioConfig& config);
Scene make_scene(WorldMap world, GalleryMap gallery, double waypoint_spacing);

struct LocalizationAttempt {
  double timestamp = 0.0;
  Pose truth;                    // camera pose at capture time
  std::optional<Pose> estimate;  // camera pose
  bool accepted = false;         // passed the gate and updated the filter
  double latency = 0.0;
};

struct TrajectorySample {
  double timestamp = 0.0;
  VehicleState truth;
  Eigen::Vector3d ekf_mean = Eigen::Vector3d::Zero();
};

enum class FailureCause { LateralDeviation, Stall };

struct FailureEvent {
  double timestamp = 0.0;
  Vec2 position = Vec2::Zero();
  double arc_length = 0.0;
  FailureCause cause = FailureCause::LateralDeviation;
};

std::string to_string(FailureCause cause);

struct EpisodeResult {
  int episode_index = 0;
  int reinit_count = 0;
  bool completed = false;
  double duration = 0.0;
  std::vector<LocalizationAttempt> localization_log;
  std::vector<TrajectorySample> trajectory_log;
  std::vector<FailureEvent> failure_events;
};

/// Test hook: extra lateral displacement (meters, left positive) applied to
/// the true vehicle at simulation time t. Must be a pure function of t.
using DisturbanceFn = std::function<double(double t)>;

/// Closed-loop episode: odometry prediction every control tick, localization
/// and delayed filter updates at the localization rate when `use_vloc`, PID
/// control toward lookahead subgoals, and re-initialization at the last
/// passed waypoint after each failure. Deterministic in (config.seed,
/// episode_index).
EpisodeResult run_episode(const ScenarioConfig& config, const Scene& scene, int episode_index,
                          bool use_vloc, const DisturbanceFn& disturbance = {});

/// Drives the route with ground-truth control while localizing passively.
std::vector<LocalizationAttempt> run_reference_recall(const ScenarioConfig& config,
                                                      const Scene& scene);

}  // namespace vlb
