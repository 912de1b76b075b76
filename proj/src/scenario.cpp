#include "vlb/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "vlb/error.hpp"
#include "vlb/route.hpp"

namespace vlb {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = boost::trim_copy(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v))
    throw Error(ErrorCode::ConfigError, key + ": expected a number, got '" + text + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& text) {
  const std::string t = boost::trim_copy(text);
  Int v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw Error(ErrorCode::ConfigError, key + ": expected an integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = boost::to_lower_copy(boost::trim_copy(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw Error(ErrorCode::ConfigError, key + ": expected a boolean, got '" + text + "'");
}

struct Binding {
  std::string section;
  std::string key;
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, const std::string&)> set;
};

// Member access helpers so the table below stays one line per key.
template <typename Field>
Binding bind_double(std::string section, std::string key, Field field) {
  const std::string name = section + "." + key;
  return {section, key, [field](const ScenarioConfig& c) { return format_double(field(const_cast<ScenarioConfig&>(c))); },
          [field, name](ScenarioConfig& c, const std::string& v) { field(c) = parse_double(name, v); }};
}

template <typename Field>
Binding bind_int(std::string section, std::string key, Field field) {
  const std::string name = section + "." + key;
  return {section, key, [field](const ScenarioConfig& c) { return std::to_string(field(const_cast<ScenarioConfig&>(c))); },
          [field, name](ScenarioConfig& c, const std::string& v) {
            field(c) = parse_int<std::remove_reference_t<decltype(field(c))>>(name, v);
          }};
}

template <typename Field>
Binding bind_string(std::string section, std::string key, Field field) {
  return {section, key, [field](const ScenarioConfig& c) { return field(const_cast<ScenarioConfig&>(c)); },
          [field](ScenarioConfig& c, const std::string& v) { field(c) = boost::trim_copy(v); }};
}

template <typename Field>
Binding bind_bool(std::string section, std::string key, Field field) {
  const std::string name = section + "." + key;
  return {section, key,
          [field](const ScenarioConfig& c) { return std::string(field(const_cast<ScenarioConfig&>(c)) ? "true" : "false"); },
          [field, name](ScenarioConfig& c, const std::string& v) { field(c) = parse_bool(name, v); }};
}

#define VLB_FIELD(expr) [](ScenarioConfig & c) -> auto& { return c.expr; }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b;
    // [world]
    b.push_back(bind_string("world", "route_shape", VLB_FIELD(world.route_shape)));
    b.push_back(bind_double("world", "landmark_density", VLB_FIELD(world.landmark_density)));
    b.push_back(bind_int("world", "seed", VLB_FIELD(world.seed)));
    b.push_back(bind_double("world", "corner_radius", VLB_FIELD(world.corner_radius)));
    b.push_back(bind_int("world", "descriptor_dim", VLB_FIELD(world.descriptor_dim)));
    b.push_back(bind_double("world", "near_offset", VLB_FIELD(world.facade.near_offset)));
    b.push_back(bind_double("world", "near_offset_jitter", VLB_FIELD(world.facade.near_offset_jitter)));
    b.push_back(bind_double("world", "near_height_min", VLB_FIELD(world.facade.near_height_min)));
    b.push_back(bind_double("world", "near_height_max", VLB_FIELD(world.facade.near_height_max)));
    b.push_back(bind_double("world", "far_fraction", VLB_FIELD(world.facade.far_fraction)));
    b.push_back(bind_double("world", "far_offset_min", VLB_FIELD(world.facade.far_offset_min)));
    b.push_back(bind_double("world", "far_offset_max", VLB_FIELD(world.facade.far_offset_max)));
    b.push_back(bind_double("world", "far_height_min", VLB_FIELD(world.facade.far_height_min)));
    b.push_back(bind_double("world", "far_height_max", VLB_FIELD(world.facade.far_height_max)));
    b.push_back(bind_double("world", "module_width", VLB_FIELD(world.facade.module_width)));
    b.push_back(bind_int("world", "template_count", VLB_FIELD(world.facade.template_count)));
    b.push_back(bind_double("world", "repeat_probability", VLB_FIELD(world.facade.repeat_probability)));
    b.push_back(bind_double("world", "instance_sigma", VLB_FIELD(world.facade.instance_sigma)));
    b.push_back(bind_double("world", "min_clearance", VLB_FIELD(world.facade.min_clearance)));
    b.push_back(bind_string("world", "world_file", VLB_FIELD(world_file)));
    // [gallery]
    b.push_back(bind_double("gallery", "spacing", VLB_FIELD(gallery.spacing)));
    b.push_back(bind_double("gallery", "camera_height", VLB_FIELD(gallery.mount.height)));
    b.push_back(bind_double("gallery", "camera_offset_z", VLB_FIELD(gallery.mount.offset_z)));
    b.push_back(bind_double("gallery", "camera_pitch_deg", VLB_FIELD(gallery.mount.pitch_deg)));
    b.push_back(bind_double("gallery", "focal_x", VLB_FIELD(gallery.intrinsics.focal_x)));
    b.push_back(bind_double("gallery", "focal_y", VLB_FIELD(gallery.intrinsics.focal_y)));
    b.push_back(bind_double("gallery", "principal_x", VLB_FIELD(gallery.intrinsics.principal_x)));
    b.push_back(bind_double("gallery", "principal_y", VLB_FIELD(gallery.intrinsics.principal_y)));
    b.push_back(bind_int("gallery", "image_width", VLB_FIELD(gallery.intrinsics.width)));
    b.push_back(bind_int("gallery", "image_height", VLB_FIELD(gallery.intrinsics.height)));
    b.push_back(bind_int("gallery", "global_dim", VLB_FIELD(gallery.global_dim)));
    b.push_back(bind_int("gallery", "seed", VLB_FIELD(gallery.seed)));
    b.push_back(bind_string("gallery", "gallery_file", VLB_FIELD(gallery_file)));
    // [conditions]
    b.push_back(bind_int("conditions", "illumination_k", VLB_FIELD(condition.illumination_k)));
    b.push_back({"conditions", "visual_range",
                 [](const ScenarioConfig& c) {
                   return c.condition.visual_range ? format_double(*c.condition.visual_range)
                                                   : std::string("none");
                 },
                 [](ScenarioConfig& c, const std::string& v) {
                   const std::string t = boost::to_lower_copy(boost::trim_copy(v));
                   if (t == "none" || t.empty())
                     c.condition.visual_range.reset();
                   else
                     c.condition.visual_range = parse_double("conditions.visual_range", v);
                 }});
    b.push_back(bind_double("conditions", "camera_offset_z", VLB_FIELD(condition.camera_offset_z)));
    b.push_back(bind_double("conditions", "camera_pitch_deg", VLB_FIELD(condition.camera_pitch_deg)));
    b.push_back(bind_bool("conditions", "rain", VLB_FIELD(condition.rain)));
    b.push_back(bind_double("conditions", "dropout_max", VLB_FIELD(degradation.dropout_max)));
    b.push_back(bind_double("conditions", "descriptor_sigma_max", VLB_FIELD(degradation.descriptor_sigma_max)));
    b.push_back(bind_double("conditions", "pixel_sigma", VLB_FIELD(degradation.pixel_sigma)));
    b.push_back(bind_double("conditions", "fog_falloff_fraction", VLB_FIELD(degradation.fog_falloff_fraction)));
    b.push_back(bind_double("conditions", "view_angle_sigma_scale", VLB_FIELD(degradation.view_angle_sigma_scale)));
    b.push_back(bind_double("conditions", "rain_pixel_sigma", VLB_FIELD(degradation.rain_pixel_sigma)));
    b.push_back(bind_double("conditions", "max_range", VLB_FIELD(degradation.max_range)));
    // [stack]
    b.push_back(bind_double("stack", "target_speed", VLB_FIELD(stack.target_speed)));
    b.push_back(bind_double("stack", "control_rate", VLB_FIELD(stack.control_rate)));
    b.push_back(bind_double("stack", "localization_rate", VLB_FIELD(stack.localization_rate)));
    b.push_back(bind_double("stack", "localization_latency", VLB_FIELD(stack.localization_latency)));
    b.push_back(bind_int("stack", "top_k", VLB_FIELD(stack.localization.top_k)));
    b.push_back(bind_double("stack", "ratio", VLB_FIELD(stack.localization.ratio)));
    b.push_back(bind_double("stack", "inlier_threshold_px", VLB_FIELD(stack.localization.ransac.inlier_threshold_px)));
    b.push_back(bind_int("stack", "ransac_max_iterations", VLB_FIELD(stack.localization.ransac.max_iterations)));
    b.push_back(bind_double("stack", "ransac_confidence", VLB_FIELD(stack.localization.ransac.confidence)));
    b.push_back(bind_int("stack", "min_inliers", VLB_FIELD(stack.localization.ransac.min_inliers)));
    b.push_back(bind_int("stack", "refine_max_iterations", VLB_FIELD(stack.localization.ransac.refine_max_iterations)));
    b.push_back(bind_double("stack", "refine_step_tolerance", VLB_FIELD(stack.localization.ransac.refine_step_tolerance)));
    b.push_back(bind_double("stack", "outlier_gate", VLB_FIELD(stack.outlier_gate)));
    b.push_back(bind_double("stack", "measurement_sigma_xy", VLB_FIELD(stack.measurement_sigma_xy)));
    b.push_back(bind_double("stack", "measurement_sigma_yaw_deg", VLB_FIELD(stack.measurement_sigma_yaw_deg)));
    b.push_back(bind_double("stack", "process_noise_scale", VLB_FIELD(stack.process_noise_scale)));
    b.push_back(bind_double("stack", "initial_sigma_xy", VLB_FIELD(stack.initial_sigma_xy)));
    b.push_back(bind_double("stack", "initial_sigma_yaw_deg", VLB_FIELD(stack.initial_sigma_yaw_deg)));
    b.push_back(bind_double("stack", "position_drift_rate", VLB_FIELD(stack.position_drift_rate)));
    b.push_back(bind_double("stack", "rotation_drift_rate", VLB_FIELD(stack.rotation_drift_rate)));
    b.push_back(bind_double("stack", "lookahead", VLB_FIELD(stack.lookahead)));
    b.push_back(bind_double("stack", "waypoint_spacing", VLB_FIELD(stack.waypoint_spacing)));
    b.push_back(bind_double("stack", "lateral_kp", VLB_FIELD(stack.gains.lateral.kp)));
    b.push_back(bind_double("stack", "lateral_ki", VLB_FIELD(stack.gains.lateral.ki)));
    b.push_back(bind_double("stack", "lateral_kd", VLB_FIELD(stack.gains.lateral.kd)));
    b.push_back(bind_double("stack", "lateral_integral_limit", VLB_FIELD(stack.gains.lateral.integral_limit)));
    b.push_back(bind_double("stack", "lateral_output_limit", VLB_FIELD(stack.gains.lateral.output_limit)));
    b.push_back(bind_double("stack", "longitudinal_kp", VLB_FIELD(stack.gains.longitudinal.kp)));
    b.push_back(bind_double("stack", "longitudinal_ki", VLB_FIELD(stack.gains.longitudinal.ki)));
    b.push_back(bind_double("stack", "longitudinal_kd", VLB_FIELD(stack.gains.longitudinal.kd)));
    b.push_back(bind_double("stack", "longitudinal_integral_limit", VLB_FIELD(stack.gains.longitudinal.integral_limit)));
    b.push_back(bind_double("stack", "longitudinal_output_limit", VLB_FIELD(stack.gains.longitudinal.output_limit)));
    b.push_back(bind_double("stack", "wheelbase", VLB_FIELD(stack.vehicle.wheelbase)));
    b.push_back(bind_double("stack", "max_acceleration", VLB_FIELD(stack.vehicle.max_acceleration)));
    b.push_back(bind_double("stack", "max_steer", VLB_FIELD(stack.vehicle.max_steer)));
    // [metrics]
    b.push_back(bind_int("metrics", "seed", VLB_FIELD(seed)));
    b.push_back(bind_int("metrics", "episodes", VLB_FIELD(metrics.episodes)));
    b.push_back(bind_double("metrics", "failure_lateral_threshold", VLB_FIELD(metrics.failure_lateral_threshold)));
    b.push_back(bind_double("metrics", "stall_timeout", VLB_FIELD(metrics.stall_timeout)));
    b.push_back(bind_double("metrics", "stall_progress", VLB_FIELD(metrics.stall_progress)));
    b.push_back(bind_int("metrics", "max_reinits", VLB_FIELD(metrics.max_reinits)));
    b.push_back(bind_double("metrics", "time_limit_factor", VLB_FIELD(metrics.time_limit_factor)));
    b.push_back(bind_double("metrics", "trajectory_log_rate", VLB_FIELD(metrics.trajectory_log_rate)));
    b.push_back(bind_double("metrics", "t1_translation_m", VLB_FIELD(metrics.thresholds.t1.translation_m)));
    b.push_back(bind_double("metrics", "t1_rotation_deg", VLB_FIELD(metrics.thresholds.t1.rotation_deg)));
    b.push_back(bind_double("metrics", "t2_translation_m", VLB_FIELD(metrics.thresholds.t2.translation_m)));
    b.push_back(bind_double("metrics", "t2_rotation_deg", VLB_FIELD(metrics.thresholds.t2.rotation_deg)));
    b.push_back(bind_double("metrics", "t3_translation_m", VLB_FIELD(metrics.thresholds.t3.translation_m)));
    b.push_back(bind_double("metrics", "t3_rotation_deg", VLB_FIELD(metrics.thresholds.t3.rotation_deg)));
    b.push_back(bind_string("metrics", "method_label", VLB_FIELD(metrics.method_label)));
    b.push_back(bind_string("metrics", "sweep_axis", VLB_FIELD(metrics.sweep_axis)));
    b.push_back(bind_string("metrics", "sweep_values", VLB_FIELD(metrics.sweep_values)));
    return b;
  }();
  return table;
}

#undef VLB_FIELD

}  // namespace

void RecallThresholds::validate() const {
  const bool increasing = t1.translation_m > 0.0 && t1.rotation_deg > 0.0 &&
                          t1.translation_m < t2.translation_m && t2.translation_m < t3.translation_m &&
                          t1.rotation_deg < t2.rotation_deg && t2.rotation_deg < t3.rotation_deg;
  if (!increasing) throw Error(ErrorCode::ConfigError, "recall thresholds must be strictly increasing");
}

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::ConfigError, what);
  };
  try {
    condition.validate();
    degradation.validate();
    if (world_file.empty()) build_route(world.route_shape, world.corner_radius);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  metrics.thresholds.validate();
  require(world.landmark_density > 0.0, "world.landmark_density must be positive");
  require(gallery.spacing > 0.0, "gallery.spacing must be positive");
  require(gallery.intrinsics.valid(), "gallery intrinsics are invalid");
  require(stack.target_speed > 0.0, "stack.target_speed must be positive");
  require(stack.control_rate > 0.0, "stack.control_rate must be positive");
  require(stack.localization_rate > 0.0, "stack.localization_rate must be positive");
  require(stack.localization_latency >= 0.0, "stack.localization_latency must be >= 0");
  require(stack.localization.top_k >= 1, "stack.top_k must be >= 1");
  require(stack.localization.ratio > 0.0 && stack.localization.ratio < 1.0, "stack.ratio must be in (0, 1)");
  require(stack.localization.ransac.inlier_threshold_px > 0.0, "stack.inlier_threshold_px must be positive");
  require(stack.localization.ransac.min_inliers >= 4, "stack.min_inliers must be >= 4");
  require(stack.outlier_gate > 0.0, "stack.outlier_gate must be positive");
  require(stack.measurement_sigma_xy > 0.0 && stack.measurement_sigma_yaw_deg > 0.0,
          "measurement sigmas must be positive");
  require(stack.process_noise_scale >= 0.0, "stack.process_noise_scale must be >= 0");
  require(stack.position_drift_rate >= 0.0 && stack.rotation_drift_rate >= 0.0, "drift rates must be >= 0");
  require(stack.lookahead > 0.0 && stack.waypoint_spacing > 0.0, "lookahead and waypoint spacing must be positive");
  require(stack.vehicle.wheelbase > 0.0 && stack.vehicle.max_acceleration > 0.0 && stack.vehicle.max_steer > 0.0,
          "vehicle parameters must be positive");
  for (const PidGains* g : {&stack.gains.lateral, &stack.gains.longitudinal})
    require(g->integral_limit > 0.0 && g->output_limit > 0.0, "PID limits must be positive");
  require(metrics.episodes >= 1, "metrics.episodes must be >= 1");
  require(metrics.failure_lateral_threshold > 0.0, "metrics.failure_lateral_threshold must be positive");
  require(metrics.stall_timeout > 0.0, "metrics.stall_timeout must be positive");
  require(metrics.max_reinits >= 0, "metrics.max_reinits must be >= 0");
  require(metrics.time_limit_factor > 1.0, "metrics.time_limit_factor must exceed 1");
  require(metrics.trajectory_log_rate > 0.0, "metrics.trajectory_log_rate must be positive");
  require(!metrics.method_label.empty() && metrics.method_label != "baseline",
          "metrics.method_label must be non-empty and not 'baseline'");
}

OdometryNoiseModel ScenarioConfig::odometry_model() const {
  return calibrate_odometry(stack.position_drift_rate, stack.rotation_drift_rate,
                            stack.target_speed / stack.control_rate);
}

FusionConfig ScenarioConfig::fusion_config() const {
  FusionConfig f;
  f.process_noise = process_noise_from_odometry(odometry_model(), stack.target_speed / stack.control_rate,
                                                stack.process_noise_scale);
  const double sxy = stack.measurement_sigma_xy;
  const double syaw = stack.measurement_sigma_yaw_deg * kDegToRad;
  f.measurement_noise = Eigen::Vector3d(sxy * sxy, sxy * sxy, syaw * syaw).asDiagonal();
  f.outlier_gate = stack.outlier_gate;
  return f;
}

Eigen::Matrix3d ScenarioConfig::initial_covariance() const {
  const double sxy = stack.initial_sigma_xy;
  const double syaw = stack.initial_sigma_yaw_deg * kDegToRad;
  return Eigen::Vector3d(sxy * sxy, sxy * sxy, syaw * syaw).asDiagonal();
}

CameraMount ScenarioConfig::query_mount() const {
  CameraMount m = gallery.mount;
  m.offset_z = condition.camera_offset_z;
  m.pitch_deg = condition.camera_pitch_deg;
  return m;
}

ScenarioConfig parse_scenario(const std::string& ini_text) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(ini_text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  ScenarioConfig config;
  std::set<std::string> known_sections;
  for (const Binding& b : bindings()) known_sections.insert(b.section);
  for (const auto& [section, children] : tree) {
    if (!known_sections.contains(section))
      throw Error(ErrorCode::ConfigError, "unknown section [" + section + "]");
    for (const auto& [key, value] : children) {
      const auto it = std::find_if(bindings().begin(), bindings().end(), [&](const Binding& b) {
        return b.section == section && b.key == key;
      });
      if (it == bindings().end())
        throw Error(ErrorCode::ConfigError, "unknown key " + section + "." + key);
      it->set(config, value.get_value<std::string>());
    }
  }
  config.validate();
  return config;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  ScenarioConfig config = parse_scenario(ss.str());
  // Relative file references resolve against the scenario's directory.
  const auto base = path.parent_path();
  for (std::string* file : {&config.world_file, &config.gallery_file}) {
    if (!file->empty() && std::filesystem::path(*file).is_relative()) *file = (base / *file).string();
  }
  return config;
}

std::string scenario_to_ini(const ScenarioConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const Binding& b : bindings()) {
    if (b.section != section) {
      if (!section.empty()) out << "\n";
      section = b.section;
      out << "[" << section << "]\n";
    }
    out << b.key << " = " << b.get(config) << "\n";
  }
  return out.str();
}

}  // namespace vlb
