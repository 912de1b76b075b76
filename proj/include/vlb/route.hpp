#pragma once

#include <string>
#include <vector>

#include "vlb/geometry.hpp"

namespace vlb {

struct RoutePoint {
  Vec2 position;
  double heading = 0.0;  // radians, direction of travel
};

/// Ordered planar polyline with arc-length bookkeeping.
class Route {
 public:
  Route() = default;
  /// Throws InvalidSpec when fewer than two points or consecutive points coincide.
  explicit Route(std::vector<RoutePoint> waypoints);
  static Route from_polyline(const std::vector<Vec2>& points);

  const std::vector<RoutePoint>& waypoints() const { return waypoints_; }
  double total_length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  double arc_length_at(std::size_t waypoint) const { return cumulative_[waypoint]; }
  std::size_t size() const { return waypoints_.size(); }

  /// Interpolated point at arc length s (clamped to the route).
  RoutePoint point_at(double s) const;

  struct Projection {
    double arc_length = 0.0;
    double lateral = 0.0;  // signed, positive to the left of travel
    double distance = 0.0;
    std::size_t segment = 0;
  };
  /// Closest point on the whole polyline.
  Projection project(const Vec2& p) const;
  /// Closest point restricted to segments overlapping [s_lo, s_hi].
  Projection project_window(const Vec2& p, double s_lo, double s_hi) const;

 private:
  Projection project_segment(const Vec2& p, std::size_t segment) const;

  std::vector<RoutePoint> waypoints_;
  std::vector<double> cumulative_;
};

/// Builds a route from a shape description.
///
/// Grammar: comma separated tokens; a number is a straight of that many
/// meters, `L` / `R` a 90 degree left / right turn. Corners are rounded with
/// `corner_radius` (the tangent length is taken from the adjacent straights).
/// Presets: `town01` (about 1.2 km, five turns), `town10` (about 0.5 km, six
/// turns) and `straight:<meters>`.
Route build_route(const std::string& shape, double corner_radius = 10.0,
                  double sample_spacing = 1.0);

double wrap_angle(double angle);

}  // namespace vlb
