// Acceptance suite: one PASS/FAIL line per criterion, extra detail indented.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "test_support.hpp"
#include "vlb/episode.hpp"
#include "vlb/error.hpp"
#include "vlb/fusion.hpp"
#include "vlb/metrics.hpp"
#include "vlb/sweep.hpp"

using namespace vlb;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Outcome {
  bool pass = false;
  std::string detail;
  std::vector<std::string> info;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s %d %s: %s (%.1f s of %.0f s budget)\n", pass ? "PASS" : "FAIL", id, name,
              o.detail.c_str(), secs, budget_s);
  for (const std::string& line : o.info) std::printf("    %s\n", line.c_str());
  std::fflush(stdout);
}

// 1 -------------------------------------------------------------------------

Outcome formula_exactness() {
  RandomStream rng(101, StreamPurpose::Test);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(20);
    std::vector<int> r(n);
    for (int& x : r) x = static_cast<int>(rng.uniform_index(50));
    const double km = 0.05 + 3.0 * rng.uniform();
    double oracle = 0.0;
    for (int x : r) oracle += x / km;
    oracle /= static_cast<double>(n);
    if (failure_rate(r, km) != oracle) ++mismatches;
  }
  const RecallThresholds t;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(40);
    std::vector<LocalizationAttempt> log(n);
    std::array<std::size_t, 3> hits{0, 0, 0};
    for (LocalizationAttempt& a : log) {
      a.truth = testing::random_pose(rng);
      if (rng.uniform() < 0.2) continue;
      const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
      const double angle_deg = 12.0 * rng.uniform();
      const Vec3 shift = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized() * 6.0 * rng.uniform();
      a.estimate = Pose(a.truth.translation() + shift,
                        Eigen::Quaterniond(Eigen::AngleAxisd(angle_deg * kDeg, axis)) * a.truth.rotation());
      // Oracle: distance between centers and the angle of the relative rotation.
      const double dt = (a.estimate->translation() - a.truth.translation()).norm();
      const double dr = a.estimate->rotation().angularDistance(a.truth.rotation()) / kDeg;
      const std::array<RecallThreshold, 3> th{t.t1, t.t2, t.t3};
      for (std::size_t i = 0; i < 3; ++i)
        if (dt < th[i].translation_m && dr < th[i].rotation_deg) ++hits[i];
    }
    const auto got = recall(log, t);
    for (std::size_t i = 0; i < 3; ++i)
      if (got[i] != static_cast<double>(hits[i]) / static_cast<double>(n)) ++mismatches;
  }
  return {mismatches == 0, fmt("%d mismatches over 1000 failure-rate and 1000 recall inputs", mismatches), {}};
}

// 2 -------------------------------------------------------------------------

struct PnpCase {
  Pose truth;
  std::vector<Correspondence2D3D> corr;
};

PnpCase pnp_case(std::uint64_t seed, int inliers, int outliers, double sigma_px) {
  const CameraIntrinsics k;
  RandomStream rng(seed, StreamPurpose::Test, 2);
  PnpCase c{testing::random_pose(rng), {}};
  for (int i = 0; i < inliers; ++i) {
    const Vec3 p = testing::point_in_view(c.truth, k, rng, 4.0, 30.0);
    Vec2 px = *project(c.truth, k, p);
    px += Vec2(rng.normal(0, sigma_px), rng.normal(0, sigma_px));
    c.corr.push_back({px, p, static_cast<LandmarkId>(i)});
  }
  for (int i = 0; i < outliers; ++i) {
    const Vec3 p = testing::point_in_view(c.truth, k, rng, 4.0, 30.0);
    c.corr.push_back({Vec2(rng.uniform(0, k.width), rng.uniform(0, k.height)), p,
                      static_cast<LandmarkId>(inliers + i)});
  }
  return c;
}

Outcome pnp_oracle() {
  const CameraIntrinsics k;
  RansacParams params;
  int exact = 0, robust = 0;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const PnpCase c = pnp_case(s, 20, 0, 0.0);
    params.seed = s;
    try {
      const PnpResult r = ransac_pnp(c.corr, k, params);
      if ((r.pose.translation() - c.truth.translation()).norm() < 1e-6 &&
          testing::rotation_angle_rad(r.pose, c.truth) < 1e-6)
        ++exact;
    } catch (const Error&) {
    }
  }
  for (std::uint64_t s = 0; s < 500; ++s) {
    const PnpCase c = pnp_case(10000 + s, 12, 8, 0.5);  // 40 % outliers
    params.seed = s;
    try {
      const PnpResult r = ransac_pnp(c.corr, k, params);
      if ((r.pose.translation() - c.truth.translation()).norm() < 0.05) ++robust;
    } catch (const Error&) {
    }
  }
  return {exact == 500 && robust >= 495,
          fmt("noiseless %d/500 within 1e-6; 40%% outliers %d/500 within 0.05 m (need 495)", exact, robust),
          {}};
}

// 3 -------------------------------------------------------------------------

Outcome odometry_calibration() {
  const ScenarioConfig config;
  const OdometryNoiseModel model = config.odometry_model();
  const double dt = 1.0 / config.stack.control_rate;
  const double speed = config.stack.target_speed;
  const int steps = static_cast<int>(std::lround(100.0 / (speed * dt)));
  double pos = 0.0, rot = 0.0;
  for (int run = 0; run < 1000; ++run) {
    WheelOdometry odom(model, RandomStream(config.seed, StreamPurpose::Odometry, 500000 + run));
    VehicleState truth{0, 0, 0, speed};
    EkfState est;
    for (int i = 0; i < steps; ++i) {
      VehicleState next = truth;
      next.x += speed * dt;
      est = ekf_predict(est, odom.sample(truth, next), {});
      truth = next;
    }
    pos += (est.mean.head<2>() - truth.position()).norm();
    rot += std::abs(std::remainder(est.mean.z() - truth.yaw, 2 * std::numbers::pi));
  }
  const double pos_rate = pos / 1000.0;          // percent of 100 m
  const double rot_rate = rot / 1000.0 / kDeg / 100.0;  // deg/m
  return {std::abs(pos_rate - 8.5) <= 1.0 && std::abs(rot_rate - 0.4) <= 0.05,
          fmt("position drift %.2f %% (8.5 +- 1.0), rotation drift %.3f deg/m (0.4 +- 0.05)", pos_rate, rot_rate),
          {}};
}

// 4 -------------------------------------------------------------------------

Outcome pristine_loop() {
  ScenarioConfig config;
  config.degradation = DegradationModel::none();
  const Scene scene = prepare_scene(config);
  std::vector<EpisodeResult> results;
  for (int e = 0; e < 5; ++e) results.push_back(run_episode(config, scene, e, true));
  const double f = failure_rate(results, scene.route_length_km());
  const auto r = recall(run_reference_recall(config, scene), config.metrics.thresholds);
  bool completed = std::all_of(results.begin(), results.end(), [](const EpisodeResult& x) { return x.completed; });
  return {f == 0.0 && r[0] >= 0.99 && completed,
          fmt("route %.3f km, F = %.2f /km, recall T1 = %.1f %%, all completed: %s", scene.route_length_km(), f,
              100.0 * r[0], completed ? "yes" : "no"),
          {}};
}

// 5 -------------------------------------------------------------------------

double rms_error(const EpisodeResult& r) {
  double sum = 0.0;
  for (const TrajectorySample& s : r.trajectory_log)
    sum += (s.ekf_mean.head<2>() - s.truth.position()).squaredNorm();
  return std::sqrt(sum / static_cast<double>(std::max<std::size_t>(1, r.trajectory_log.size())));
}

/// Odometry-only dead reckoning in 100 m segments along the route under
/// ground-truth control; mean end-of-segment error as a fraction of 100 m.
double open_loop_drift(const ScenarioConfig& config, const Scene& scene) {
  const double dt = 1.0 / config.stack.control_rate;
  SubgoalTracker tracker(scene.plan, config.stack.lookahead);
  PidController controller(config.stack.gains);
  const RoutePoint start = scene.plan.front();
  VehicleState truth{start.position.x(), start.position.y(), start.heading, 0.0};
  const Vec2 goal = scene.plan.back().position;
  std::uint32_t segment = 0;
  auto fresh = [&] {
    return WheelOdometry(config.odometry_model(), RandomStream(config.seed, StreamPurpose::Odometry, 1000 + segment));
  };
  WheelOdometry odom = fresh();
  EkfState est{Eigen::Vector3d(truth.x, truth.y, truth.yaw), Eigen::Matrix3d::Zero()};
  double travelled = 0.0, error_sum = 0.0;
  int samples = 0;
  for (int step = 0; step < 1000000; ++step) {
    const PlanarPose pose{truth.x, truth.y, truth.yaw};
    const Subgoal sg = tracker.next(pose);
    if ((truth.position() - goal).norm() <= config.stack.lookahead && sg.goal_reached) break;
    const VehicleState next = step_vehicle(
        truth, controller.control(pose, truth.speed, sg.goal_reached ? goal : sg.waypoint, config.stack.target_speed, dt),
        dt, config.stack.vehicle);
    est = ekf_predict(est, odom.sample(truth, next), {});
    travelled += (next.position() - truth.position()).norm();
    truth = next;
    if (travelled >= 100.0) {
      error_sum += (est.mean.head<2>() - truth.position()).norm() / travelled;
      ++samples;
      travelled = 0.0;
      ++segment;
      odom = fresh();
      est.mean = Eigen::Vector3d(truth.x, truth.y, truth.yaw);
    }
  }
  return samples ? error_sum / samples : 0.0;
}

Outcome drift_correction() {
  Outcome o;
  double worst = 0.0, drift_sum = 0.0, worst_default = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ScenarioConfig config;
    config.seed = seed;
    config.stack.localization_latency = 0.0;
    const Scene scene = prepare_scene(config);
    const double rms = rms_error(run_episode(config, scene, 0, true));
    worst = std::max(worst, rms);
    drift_sum += open_loop_drift(config, scene);
    ScenarioConfig delayed = config;
    delayed.stack.localization_latency = ScenarioConfig{}.stack.localization_latency;
    worst_default = std::max(worst_default, rms_error(run_episode(delayed, scene, 0, true)));
  }
  const double drift = drift_sum / 10.0;
  o.pass = worst < 0.5 && drift > 0.08;
  o.detail = fmt("worst RMS with 2 Hz localization %.3f m (< 0.5); odometry-only drift %.2f %% of distance (> 8)",
                 worst, 100.0 * drift);
  o.info.push_back(fmt("measurements applied at capture time; with the default %.0f ms latency the worst RMS is %.3f m",
                       1000.0 * ScenarioConfig{}.stack.localization_latency, worst_default));
  return o;
}

// 6 -------------------------------------------------------------------------

Outcome convergence() {
  ScenarioConfig config;
  config.condition.illumination_k = 10;
  config.degradation.dropout_max = 1.0;
  const Scene scene = prepare_scene(config);
  std::vector<EpisodeResult> vloc, base;
  std::size_t accepted = 0;
  for (int e = 0; e < config.metrics.episodes; ++e) {
    vloc.push_back(run_episode(config, scene, e, true));
    base.push_back(run_episode(config, scene, e, false));
    for (const auto& a : vloc.back().localization_log) accepted += a.accepted;
  }
  const double fv = failure_rate(vloc, scene.route_length_km());
  const double fb = failure_rate(base, scene.route_length_km());
  return {std::abs(fv - fb) <= 0.2 * fb,
          fmt("vloc F = %.2f /km, odometry-only F = %.2f /km, %zu accepted updates", fv, fb, accepted),
          {}};
}

// 7, 8 ----------------------------------------------------------------------

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t m = i; m <= j; ++m) r[idx[m]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxx > 0 && syy > 0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

ScenarioConfig trend_config() {
  ScenarioConfig config;
  config.metrics.episodes = 5;
  config.metrics.sweep_axis = "illumination";
  config.metrics.sweep_values = "0,1,2,3,4,5,6,7,8,9,10";
  return config;
}

std::string first_csv;

Outcome trend() {
  const ScenarioConfig config = trend_config();
  const Scene scene = prepare_scene(config);
  const ResultSet rs = run_sweep(config, scene, 1);
  const auto rows = summarize(rs);
  first_csv = summary_csv(rows);
  if (!rs.errors.empty()) return {false, "sweep reported errors: " + rs.errors.front().message, {}};

  std::vector<double> k, f, t1;
  double baseline = 0.0;
  Outcome o;
  for (const SummaryRow& r : rows) {
    if (r.method == kBaselineMethod) {
      baseline = r.failure_rate;
      continue;
    }
    k.push_back(std::stod(r.axis_value));
    f.push_back(r.failure_rate);
    t1.push_back(r.recall ? (*r.recall)[0] : 0.0);
    o.info.push_back(fmt("k = %-2s F = %6.2f /km  recall T1/T2/T3 = %5.1f / %5.1f / %5.1f %%", r.axis_value.c_str(),
                         r.failure_rate, 100.0 * (*r.recall)[0], 100.0 * (*r.recall)[1], 100.0 * (*r.recall)[2]));
  }
  o.info.push_back(fmt("odometry-only baseline F = %.2f /km", baseline));
  const double rho = spearman(k, t1);
  const double peak = *std::max_element(f.begin(), f.end());
  const bool zero_at_0 = !f.empty() && f.front() == 0.0;
  o.pass = zero_at_0 && peak > baseline && rho <= -0.9;
  o.detail = fmt("F(k=0) = %.2f, peak F = %.2f vs baseline %.2f, Spearman(k, T1) = %.3f", f.empty() ? -1.0 : f.front(),
                 peak, baseline, rho);
  return o;
}

Outcome determinism() {
  const ScenarioConfig config = trend_config();
  const Scene scene = prepare_scene(config);
  const int jobs = static_cast<int>(std::max(2u, std::thread::hardware_concurrency()));
  const std::string second = summary_csv(summarize(run_sweep(config, scene, jobs)));
  const bool same = !first_csv.empty() && second == first_csv;
  return {same, fmt("second sweep with %d threads %s the first (%zu bytes)", jobs,
                    same ? "is byte-identical to" : "differs from", second.size()),
          {}};
}

// 9 -------------------------------------------------------------------------

Outcome ekf_algebra() {
  EkfState s;
  s.mean << 1.0, 2.0, 0.5;
  s.covariance << 0.04, 0.01, 0.002, 0.01, 0.09, -0.003, 0.002, -0.003, 0.0025;
  FusionConfig c;
  c.process_noise = Eigen::Vector3d(1e-4, 2e-4, 3e-5).asDiagonal();
  c.measurement_noise = Eigen::Vector3d(0.25, 0.25, 0.0012).asDiagonal();
  const EkfState p = ekf_predict(s, {Vec2(0.3, 0.1), 0.05, IncrementFrame::Body}, c);
  const Eigen::Vector3d pm(1.2153322147066915148, 2.2315859177702981717, 0.55);
  Eigen::Matrix3d pc;
  pc << 0.039307736422192585579, 0.011000752411303377415, 0.0014210352055742545708,
      0.011000752411303377415, 0.089023926618486072645, -0.002461669463233271213,
      0.0014210352055742545708, -0.002461669463233271213, 0.00253;
  const UpdateResult u = ekf_update(p, {1.4, 2.1, 0.6}, c);
  const Eigen::Vector3d um(1.2533803873946000796, 2.1782377049558472088, 0.58443017308375746336);
  Eigen::Matrix3d uc;
  uc << 0.033244953872860295807, 0.0076696918372339024126, 0.00042067148232149943232,
      0.0076696918372339024126, 0.064488165065242419442, -0.00060169572706987079661,
      0.00042067148232149943232, -0.00060169572706987079661, 0.00081126567508781237528;
  const double err = std::max({(p.mean - pm).cwiseAbs().maxCoeff(), (p.covariance - pc).cwiseAbs().maxCoeff(),
                               (u.state.mean - um).cwiseAbs().maxCoeff(), (u.state.covariance - uc).cwiseAbs().maxCoeff()});

  RandomStream rng(909, StreamPurpose::Test);
  EkfState f;
  f.covariance = Eigen::Matrix3d::Identity() * 0.1;
  FusionConfig fc;
  fc.process_noise = Eigen::Vector3d(1e-4, 1e-4, 1e-6).asDiagonal();
  long bad = 0;
  for (int i = 0; i < 100000; ++i) {
    f = ekf_predict(f, {Vec2(rng.uniform(-0.1, 0.2), rng.uniform(-0.05, 0.05)), rng.uniform(-0.02, 0.02),
                        (i % 2) ? IncrementFrame::Body : IncrementFrame::Odom},
                    fc);
    if (!covariance_valid(f.covariance)) ++bad;
    if (i % 25 == 0) {
      f = ekf_update(f, {f.mean.x() + rng.normal(0, 0.5), f.mean.y() + rng.normal(0, 0.5), f.mean.z() + rng.normal(0, 0.03)},
                     fc)
              .state;
      if (!covariance_valid(f.covariance)) ++bad;
    }
  }
  return {u.accepted && err <= 1e-12 && bad == 0,
          fmt("max deviation from the hand-computed step %.1e (<= 1e-12); %ld non-PSD covariances in 1e5 steps", err, bad),
          {}};
}

}  // namespace

int main() {
  criterion(1, "formula exactness", 1.0, formula_exactness);
  criterion(2, "PnP oracle suite", 30.0, pnp_oracle);
  criterion(3, "odometry calibration", 10.0, odometry_calibration);
  criterion(4, "pristine closed loop", 120.0, pristine_loop);
  criterion(5, "drift correction", 300.0, drift_correction);
  criterion(6, "convergence to odometry-only", 300.0, convergence);
  criterion(7, "illumination trend", 600.0, trend);
  criterion(8, "sweep determinism", 600.0, determinism);
  criterion(9, "EKF algebra", 10.0, ekf_algebra);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
