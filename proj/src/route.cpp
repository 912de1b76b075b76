#include "vlb/route.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/algorithm/string.hpp>

#include "vlb/error.hpp"

namespace vlb {

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  angle = std::fmod(angle, two_pi);
  if (angle <= -std::numbers::pi) angle += two_pi;
  if (angle > std::numbers::pi) angle -= two_pi;
  return angle;
}

Route::Route(std::vector<RoutePoint> waypoints) : waypoints_(std::move(waypoints)) {
  if (waypoints_.size() < 2) throw Error(ErrorCode::InvalidSpec, "route needs two waypoints");
  cumulative_.resize(waypoints_.size(), 0.0);
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    const double len = (waypoints_[i].position - waypoints_[i - 1].position).norm();
    if (!(len > 1e-9))
      throw Error(ErrorCode::InvalidSpec, "consecutive route waypoints coincide");
    cumulative_[i] = cumulative_[i - 1] + len;
  }
}

Route Route::from_polyline(const std::vector<Vec2>& points) {
  if (points.size() < 2) throw Error(ErrorCode::InvalidSpec, "route needs two waypoints");
  std::vector<RoutePoint> wps;
  wps.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec2 d = i + 1 < points.size() ? points[i + 1] - points[i] : points[i] - points[i - 1];
    wps.push_back({points[i], std::atan2(d.y(), d.x())});
  }
  return Route(std::move(wps));
}

RoutePoint Route::point_at(double s) const {
  s = std::clamp(s, 0.0, total_length());
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t seg = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  seg = std::min(seg, waypoints_.size() - 2);
  const double len = cumulative_[seg + 1] - cumulative_[seg];
  const double t = std::clamp((s - cumulative_[seg]) / len, 0.0, 1.0);
  const Vec2 a = waypoints_[seg].position;
  const Vec2 b = waypoints_[seg + 1].position;
  const Vec2 d = b - a;
  return {a + t * d, std::atan2(d.y(), d.x())};
}

Route::Projection Route::project_segment(const Vec2& p, std::size_t seg) const {
  const Vec2 a = waypoints_[seg].position;
  const Vec2 d = waypoints_[seg + 1].position - a;
  const double len2 = d.squaredNorm();
  const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
  const Vec2 foot = a + t * d;
  const Vec2 off = p - foot;
  const double cross = d.x() * (p - a).y() - d.y() * (p - a).x();
  Projection proj;
  proj.arc_length = cumulative_[seg] + t * std::sqrt(len2);
  proj.distance = off.norm();
  proj.lateral = cross >= 0.0 ? proj.distance : -proj.distance;
  proj.segment = seg;
  return proj;
}

Route::Projection Route::project(const Vec2& p) const {
  return project_window(p, 0.0, total_length());
}

Route::Projection Route::project_window(const Vec2& p, double s_lo, double s_hi) const {
  std::size_t first = 0;
  std::size_t last = waypoints_.size() - 2;
  if (s_lo > 0.0) {
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s_lo);
    first = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  }
  if (s_hi < total_length()) {
    auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), s_hi);
    last = std::min(last, static_cast<std::size_t>(it - cumulative_.begin()));
  }
  first = std::min(first, last);
  Projection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t seg = first; seg <= last; ++seg) {
    const Projection cand = project_segment(p, seg);
    if (cand.distance < best.distance) best = cand;
  }
  return best;
}

namespace {

std::string expand_preset(const std::string& shape) {
  if (shape == "town01") return "261,R,200,R,250,L,200,L,150,R,160";
  if (shape == "town10") return "90,L,60,R,80,R,60,L,70,L,60,R,105";
  if (boost::starts_with(shape, "straight:")) return shape.substr(9);
  return shape;
}

}  // namespace

Route build_route(const std::string& shape, double corner_radius, double sample_spacing) {
  if (!(sample_spacing > 0.0) || corner_radius < 0.0)
    throw Error(ErrorCode::InvalidSpec, "bad route sampling parameters");
  std::vector<std::string> tokens;
  boost::split(tokens, expand_preset(shape), boost::is_any_of(", "), boost::token_compress_on);

  struct Leg {
    double length;
    int turn_after;  // +1 left, -1 right, 0 none
  };
  std::vector<Leg> legs;
  for (const auto& raw : tokens) {
    const std::string tok = boost::trim_copy(raw);
    if (tok.empty()) continue;
    if (tok == "L" || tok == "R") {
      if (legs.empty() || legs.back().turn_after != 0)
        throw Error(ErrorCode::InvalidSpec, "turn must follow a straight in '" + shape + "'");
      legs.back().turn_after = tok == "L" ? 1 : -1;
      continue;
    }
    double len = 0.0;
    try {
      std::size_t used = 0;
      len = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidSpec, "bad route token '" + tok + "'");
    }
    if (!legs.empty() && legs.back().turn_after == 0)
      throw Error(ErrorCode::InvalidSpec, "two straights without a turn in '" + shape + "'");
    legs.push_back({len, 0});
  }
  if (legs.empty() || legs.back().turn_after != 0)
    throw Error(ErrorCode::InvalidSpec, "route shape must start and end with a straight");

  std::vector<Vec2> points = {Vec2::Zero()};
  Vec2 pos = Vec2::Zero();
  double heading = 0.0;
  for (std::size_t i = 0; i < legs.size(); ++i) {
    const double trim_start = i > 0 ? corner_radius : 0.0;
    const double trim_end = legs[i].turn_after != 0 ? corner_radius : 0.0;
    const double straight = legs[i].length - trim_start - trim_end;
    if (!(straight > 0.0))
      throw Error(ErrorCode::InvalidSpec, "straight too short for the corner radius");
    const Vec2 dir(std::cos(heading), std::sin(heading));
    const int n = std::max(1, static_cast<int>(std::ceil(straight / sample_spacing)));
    const Vec2 start = pos;
    for (int k = 1; k <= n; ++k) points.push_back(start + dir * (straight * k / n));
    pos = start + dir * straight;

    if (legs[i].turn_after != 0 && corner_radius > 0.0) {
      const double sign = legs[i].turn_after;
      const Vec2 normal(-dir.y() * sign, dir.x() * sign);
      const Vec2 center = pos + normal * corner_radius;
      const double arc = corner_radius * std::numbers::pi / 2.0;
      const int m = std::max(2, static_cast<int>(std::ceil(arc / sample_spacing)));
      const Vec2 radial = pos - center;
      for (int k = 1; k <= m; ++k) {
        const double a = sign * (std::numbers::pi / 2.0) * k / m;
        const Eigen::Rotation2Dd rot(a);
        points.push_back(center + rot * radial);
      }
      pos = points.back();
    }
    heading += legs[i].turn_after * std::numbers::pi / 2.0;
  }
  return Route::from_polyline(points);
}

}  // namespace vlb
