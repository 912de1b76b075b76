#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vlb/sweep.hpp"

namespace vlb {

/// Text artifacts derived from a result set. CSV unless noted.
struct Report {
  std::string summary;           // one row per (axis value, method) plus baseline
  std::string failure_table;     // methods x axis values, baseline row last
  std::string recall_table;      // methods x axis values, "T1/T2/T3" cells in percent
  std::string failure_series;    // long form: axis_value, method, failure_rate, baseline
  std::string recall_scatter;    // method, axis_value, recall_T1, failure_rate
  std::string crash_locations;   // method, axis_value, episode, x, y, arc_length, cause
  std::string route;             // x, y polyline
  std::string failure_svg;       // line chart over the axis
  std::string scatter_svg;       // recall T1 against failure rate
  std::string crash_svg;         // route with crash points
};

/// Throws MissingBaseline when the result set has no odometry-only episodes.
Report build_report(const ResultSet& results);

/// Writes every artifact into `dir`; SVG files only when `svg` is set.
void write_report(const Report& report, const std::filesystem::path& dir, bool svg = true);

}  // namespace vlb
