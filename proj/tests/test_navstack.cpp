#include <cmath>
#include <numbers>

#include "doctest.h"
#include "vlb/navstack.hpp"

using namespace vlb;

namespace {

double polyline_length(const std::vector<RoutePoint>& wps) {
  double sum = 0.0;
  for (std::size_t i = 1; i < wps.size(); ++i) sum += (wps[i].position - wps[i - 1].position).norm();
  return sum;
}

struct LoopStats {
  double max_cross_track = 0.0;
  bool completed = false;
};

// Ground-truth pose control at 4 m/s, 50 Hz.
LoopStats drive_ground_truth(const Route& route) {
  SubgoalTracker tracker(plan_global(route, 2.0), 4.0);
  PidController controller;
  const RoutePoint start = route.point_at(0.0);
  VehicleState v{start.position.x(), start.position.y(), start.heading, 0.0};
  LoopStats stats;
  const double dt = 0.02;
  for (int i = 0; i < 200000; ++i) {
    const PlanarPose pose{v.x, v.y, v.yaw};
    const Subgoal sg = tracker.next(pose);
    if (sg.goal_reached) {
      stats.completed = true;
      break;
    }
    v = step_vehicle(v, controller.control(pose, v.speed, sg.waypoint, 4.0, dt), dt);
    stats.max_cross_track = std::max(stats.max_cross_track, route.project(v.position()).distance);
  }
  return stats;
}

}  // namespace

TEST_CASE("plan_global fence posts") {
  const Route r = build_route("straight:100");
  const auto wps = plan_global(r, 10.0);
  REQUIRE(wps.size() == 11);
  CHECK(wps.front().position.norm() < 1e-12);
  CHECK((wps.back().position - Vec2(100, 0)).norm() < 1e-12);

  const auto two = plan_global(r, 150.0);
  REQUIRE(two.size() == 2);
  CHECK((two.back().position - Vec2(100, 0)).norm() < 1e-12);
  CHECK(plan_global(r, 100.0).size() == 2);

  const Route town = build_route("town01");
  const auto dense = plan_global(town, 1.0);
  CHECK(std::abs(polyline_length(dense) / town.total_length() - 1.0) < 1e-3);
}

TEST_CASE("subgoal selection") {
  const Route r = build_route("straight:100");
  SubgoalTracker t(plan_global(r, 1.0), 5.0);
  const Subgoal a = t.next({0, 0, 0});
  CHECK(a.waypoint.x() == doctest::Approx(5.0));
  CHECK(!a.goal_reached);

  SubgoalTracker offset(plan_global(r, 1.0), 5.0);
  SubgoalTracker onroute(plan_global(r, 1.0), 5.0);
  CHECK(offset.next({30.3, 1.0, 0.2}).index == onroute.next({30.3, 0.0, 0.0}).index);

  SubgoalTracker end(plan_global(r, 1.0), 5.0);
  for (double x = 0; x < 97.0; x += 1.0) end.next({x, 0, 0});
  CHECK(end.next({97.0, 0.0, 0.0}).goal_reached);

  // No backtracking when the pose moves backwards.
  SubgoalTracker mono(plan_global(r, 1.0), 5.0);
  const std::size_t i1 = mono.next({50, 0, 0}).index;
  const std::size_t i2 = mono.next({20, 0, 0}).index;
  CHECK(i2 >= i1);
  mono.reset(10);
  CHECK(mono.next({10, 0, 0}).index == 15);
  CHECK(mono.last_passed() == 10);
}

TEST_CASE("pid control conventions") {
  PidController c;
  ControlCommand cmd = c.control({0, 0, 0}, 4.0, Vec2(5, 0), 4.0, 0.02);
  CHECK(cmd.steer == 0.0);
  CHECK(cmd.throttle == 0.0);

  c.reset();
  cmd = c.control({0, 0, 0}, 4.0, Vec2(5, 2), 4.0, 0.02);
  CHECK(cmd.steer > 0.0);
  c.reset();
  cmd = c.control({0, 0, 0}, 4.0, Vec2(5, -2), 4.0, 0.02);
  CHECK(cmd.steer < 0.0);
  c.reset();
  cmd = c.control({0, 0, 0}, 1.0, Vec2(5, 0), 4.0, 0.02);
  CHECK(cmd.throttle > 0.0);
}

TEST_CASE("pid output stays bounded") {
  Pid pid({2.0, 5.0, 0.5, 0.3, 0.6});
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    worst = std::max(worst, std::abs(pid.update(10.0 * std::sin(i * 0.001), 0.02)));
    CHECK(std::abs(pid.integral()) <= 0.3);
  }
  CHECK(worst <= 0.6);
}

TEST_CASE("ground truth closed loop tracks both routes") {
  for (const char* shape : {"town01", "town10"}) {
    CAPTURE(shape);
    const LoopStats s = drive_ground_truth(build_route(shape));
    CHECK(s.completed);
    CHECK(s.max_cross_track < 0.5);
  }
}
