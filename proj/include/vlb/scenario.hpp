#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vlb/fusion.hpp"
#include "vlb/navstack.hpp"
#include "vlb/vloc.hpp"
#include "vlb/world.hpp"

namespace vlb {

struct RecallThreshold {
  double translation_m = 0.0;
  double rotation_deg = 0.0;
};

struct RecallThresholds {
  RecallThreshold t1{0.25, 2.0};
  RecallThreshold t2{0.5, 5.0};
  RecallThreshold t3{5.0, 10.0};

  void validate() const;
};

struct StackConfig {
  double target_speed = 4.0;            // m/s
  double control_rate = 50.0;           // Hz
  double localization_rate = 2.0;       // Hz
  double localization_latency = 0.166;  // s
  LocalizationParams localization;
  double outlier_gate = 20.0;  // m
  double measurement_sigma_xy = 0.5;
  double measurement_sigma_yaw_deg = 2.0;
  double process_noise_scale = 3.0;
  double initial_sigma_xy = 0.1;
  double initial_sigma_yaw_deg = 1.0;
  double position_drift_rate = 0.085;
  double rotation_drift_rate = 0.4;  // deg/m
  double lookahead = 4.0;
  double waypoint_spacing = 2.0;
  ControllerGains gains;
  VehicleParams vehicle;
};

struct MetricsConfig {
  int episodes = 5;
  double failure_lateral_threshold = 2.0;  // m
  double stall_timeout = 30.0;             // s
  double stall_progress = 1.0;             // m
  int max_reinits = 200;
  double time_limit_factor = 4.0;  // episode time limit in units of the nominal route time
  double trajectory_log_rate = 2.0;  // Hz
  RecallThresholds thresholds;
  std::string method_label = "vloc";
  std::string sweep_axis = "illumination";
  std::string sweep_values = "0,1,2,3,4,5,6,7,8,9,10";
};

/// Everything a run or sweep needs. Loaded from an INI file with sections
/// [world], [gallery], [conditions], [stack] and [metrics].
struct ScenarioConfig {
  std::uint64_t seed = 1;  // experiment seed ([metrics] seed)
  WorldSpec world;
  std::string world_file;  // empty: generate from [world]
  GalleryParams gallery;
  std::string gallery_file;  // empty: build in memory
  EnvironmentCondition condition;
  DegradationModel degradation;
  StackConfig stack;
  MetricsConfig metrics;

  /// Throws ConfigError.
  void validate() const;
  OdometryNoiseModel odometry_model() const;
  FusionConfig fusion_config() const;
  Eigen::Matrix3d initial_covariance() const;
  CameraMount query_mount() const;
};

/// Throws ConfigError on unknown keys, bad values or unreadable files.
ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario(const std::string& ini_text);
/// INI text with every key at its current value.
std::string scenario_to_ini(const ScenarioConfig& config);

}  // namespace vlb
