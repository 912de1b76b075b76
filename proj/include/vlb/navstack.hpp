#pragma once

#include <cstddef>
#include <vector>

#include "vlb/fusion.hpp"
#include "vlb/route.hpp"
#include "vlb/world.hpp"

namespace vlb {

/// Waypoints at uniform arc length along the route, first at the start and
/// last at the goal (the final gap may be shorter).
std::vector<RoutePoint> plan_global(const Route& route, double waypoint_spacing);

struct Subgoal {
  std::size_t index = 0;
  Vec2 waypoint = Vec2::Zero();
  bool goal_reached = false;
};

/// Lookahead subgoal selection over a fixed plan. The subgoal index never
/// decreases unless reset.
class SubgoalTracker {
 public:
  SubgoalTracker(std::vector<RoutePoint> waypoints, double lookahead);

  Subgoal next(const PlanarPose& pose);
  /// Restart tracking from a waypoint, e.g. after re-initialization.
  void reset(std::size_t waypoint_index);

  const std::vector<RoutePoint>& waypoints() const { return waypoints_; }
  const Route& path() const { return path_; }
  /// Arc length of the last projection onto the plan.
  double progress() const { return progress_; }
  /// Index of the last waypoint at or behind the current progress.
  std::size_t last_passed() const;

 private:
  std::vector<RoutePoint> waypoints_;
  Route path_;
  double lookahead_;
  double progress_ = 0.0;
  std::size_t index_ = 0;
};

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double integral_limit = 1.0;
  double output_limit = 1.0;
};

class Pid {
 public:
  explicit Pid(const PidGains& gains = {}) : gains_(gains) {}
  double update(double error, double dt);
  void reset();
  double integral() const { return integral_; }

 private:
  PidGains gains_;
  double integral_ = 0.0;
  double previous_error_ = 0.0;
  bool has_previous_ = false;
};

struct ControllerGains {
  PidGains lateral{1.2, 0.05, 0.3, 1.0, 0.6};
  PidGains longitudinal{0.8, 0.1, 0.0, 5.0, 1.0};
};

/// Lateral PID on the bearing error to the subgoal, longitudinal PID on speed.
class PidController {
 public:
  explicit PidController(const ControllerGains& gains = {})
      : lateral_(gains.lateral), longitudinal_(gains.longitudinal) {}

  ControlCommand control(const PlanarPose& pose, double speed, const Vec2& subgoal,
                         double target_speed, double dt);
  void reset();

 private:
  Pid lateral_;
  Pid longitudinal_;
};

/// Signed angle from the heading to the direction of `target`, positive to
/// the left.
double bearing_error(const PlanarPose& pose, const Vec2& target);

}  // namespace vlb
