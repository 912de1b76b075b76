#include "vlb/navstack.hpp"

#include <algorithm>
#include <cmath>

#include "vlb/error.hpp"

namespace vlb {

std::vector<RoutePoint> plan_global(const Route& route, double waypoint_spacing) {
  if (!(waypoint_spacing > 0.0)) throw Error(ErrorCode::InvalidSpec, "waypoint spacing must be positive");
  const double length = route.total_length();
  std::vector<RoutePoint> out;
  const auto n = static_cast<std::size_t>(std::floor(length / waypoint_spacing));
  for (std::size_t i = 0; i <= n; ++i) {
    const double s = static_cast<double>(i) * waypoint_spacing;
    if (i > 0 && length - s < 1e-9) break;
    out.push_back(route.point_at(s));
  }
  out.push_back(route.point_at(length));
  return out;
}

SubgoalTracker::SubgoalTracker(std::vector<RoutePoint> waypoints, double lookahead)
    : waypoints_(std::move(waypoints)), lookahead_(lookahead) {
  if (waypoints_.empty()) throw Error(ErrorCode::InvalidSpec, "no waypoints");
  if (!(lookahead > 0.0)) throw Error(ErrorCode::InvalidSpec, "lookahead must be positive");
  if (waypoints_.size() == 1) {
    RoutePoint end = waypoints_.front();
    end.position += Vec2(std::cos(end.heading), std::sin(end.heading)) * 1e-3;
    waypoints_.push_back(end);
  }
  path_ = Route(waypoints_);
}

Subgoal SubgoalTracker::next(const PlanarPose& pose) {
  const Vec2 p(pose.x, pose.y);
  // Search a window around the previous progress so self-approaching parts
  // of the route cannot capture the projection.
  const auto proj = path_.project_window(p, progress_ - 2.0 * lookahead_, progress_ + 4.0 * lookahead_);
  progress_ = std::max(progress_, proj.arc_length);
  const double target = progress_ + lookahead_;
  while (index_ + 1 < waypoints_.size() && path_.arc_length_at(index_) < target) ++index_;

  Subgoal out;
  out.index = index_;
  out.waypoint = waypoints_[index_].position;
  out.goal_reached = (p - waypoints_.back().position).norm() <= lookahead_ &&
                     path_.total_length() - progress_ <= 2.0 * lookahead_;
  return out;
}

void SubgoalTracker::reset(std::size_t waypoint_index) {
  index_ = std::min(waypoint_index, waypoints_.size() - 1);
  progress_ = path_.arc_length_at(index_);
}

std::size_t SubgoalTracker::last_passed() const {
  std::size_t i = 0;
  while (i + 1 < waypoints_.size() && path_.arc_length_at(i + 1) <= progress_) ++i;
  return i;
}

double Pid::update(double error, double dt) {
  integral_ = std::clamp(integral_ + error * dt, -gains_.integral_limit, gains_.integral_limit);
  const double derivative = has_previous_ ? (error - previous_error_) / dt : 0.0;
  previous_error_ = error;
  has_previous_ = true;
  const double u = gains_.kp * error + gains_.ki * integral_ + gains_.kd * derivative;
  return std::clamp(u, -gains_.output_limit, gains_.output_limit);
}

void Pid::reset() {
  integral_ = 0.0;
  previous_error_ = 0.0;
  has_previous_ = false;
}

double bearing_error(const PlanarPose& pose, const Vec2& target) {
  const double bearing = std::atan2(target.y() - pose.y, target.x() - pose.x);
  return wrap_angle(bearing - pose.yaw);
}

ControlCommand PidController::control(const PlanarPose& pose, double speed, const Vec2& subgoal,
                                      double target_speed, double dt) {
  ControlCommand cmd;
  cmd.steer = lateral_.update(bearing_error(pose, subgoal), dt);
  cmd.throttle = longitudinal_.update(target_speed - speed, dt);
  return cmd;
}

void PidController::reset() {
  lateral_.reset();
  longitudinal_.reset();
}

}  // namespace vlb
