#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vlb/episode.hpp"

namespace vlb {

inline constexpr int kResultSchemaVersion = 1;

enum class SweepAxis { None, Illumination, Fog, Viewpoint, Dropout };

std::string to_string(SweepAxis axis);
/// Throws ConfigError for unknown names.
SweepAxis parse_sweep_axis(std::string_view name);

/// The 13 (z, pitch) camera offsets of the viewpoint experiment.
inline constexpr std::array<std::array<double, 2>, 13> kViewpointOffsets{{
    {0, 0}, {2, 10}, {4, 22.5}, {5, 27.5}, {6, 32.5}, {7, 35}, {8, 37.5},
    {9, 40}, {10, 40}, {11, 40}, {13, 40}, {15, 40}, {16, 40},
}};

struct AxisPoint {
  std::string label;  // axis_value column
  ScenarioConfig config;
};

/// Expands a comma-separated value list into per-point configs. Viewpoint
/// values are `z/theta` pairs. "default" selects the standard list of the
/// axis. Throws ConfigError on malformed or out-of-range values.
std::vector<AxisPoint> expand_axis(const ScenarioConfig& base, SweepAxis axis,
                                   std::string_view values);

struct EpisodeRecord {
  std::string method;
  std::string axis_value;
  int episode_index = 0;
  int reinit_count = 0;
  bool completed = false;
  double duration = 0.0;
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  std::vector<FailureEvent> failures;
};

struct ReferenceRecord {
  std::string method;
  std::string axis_value;
  std::size_t attempts = 0;
  std::array<std::size_t, 3> hits{0, 0, 0};  // attempts within T1, T2, T3

  std::array<double, 3> recall() const;
};

struct PointError {
  std::string method;
  std::string axis_value;
  std::string message;
};

struct ResultSet {
  int schema_version = kResultSchemaVersion;
  std::string axis = "none";
  std::uint64_t seed = 0;
  double route_length_km = 0.0;
  std::vector<Vec2> route;  // polyline, for crash maps
  std::vector<std::string> axis_values;
  std::vector<EpisodeRecord> episodes;
  std::vector<ReferenceRecord> references;
  std::vector<PointError> errors;

  /// Non-baseline methods in order of first appearance.
  std::vector<std::string> methods() const;
  bool has_baseline() const;
};

inline const std::string kBaselineMethod = "baseline";
inline const std::string kBaselineAxisValue = "all";

/// Runs config.metrics.episodes closed-loop episodes and one reference pass
/// per point, plus the odometry-only baseline once. Work is spread over
/// `jobs` threads; the result does not depend on the schedule. Exceptions
/// from a unit of work are recorded in `errors` and do not stop the sweep.
ResultSet run_sweep(const ScenarioConfig& config, const Scene& scene,
                    const std::vector<AxisPoint>& points, std::string axis, int jobs);

/// Axis and values from config.metrics.
ResultSet run_sweep(const ScenarioConfig& config, const Scene& scene, int jobs);

/// JSON lines: a header record followed by one record per episode,
/// reference pass and error. Throws IoError / SchemaVersion.
void save_result_set(const ResultSet& results, const std::filesystem::path& path);
ResultSet load_result_set(const std::filesystem::path& path);

/// Concatenates result sets over the same axis. Throws InvalidSpec when axes
/// or route lengths disagree.
ResultSet merge_result_sets(const std::vector<ResultSet>& sets);

struct SummaryRow {
  std::string axis_value;
  std::string method;
  double failure_rate = 0.0;
  std::optional<std::array<double, 3>> recall;  // empty for the baseline
  double success_rate = 0.0;
  int episodes = 0;
};

/// One row per (axis value, method) with at least one episode, then the
/// baseline row when present.
std::vector<SummaryRow> summarize(const ResultSet& results);
std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Fixed-precision decimal used in every CSV the tool writes.
std::string format_number(double value);

}  // namespace vlb
