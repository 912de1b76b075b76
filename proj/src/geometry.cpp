#include "vlb/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "vlb/error.hpp"
#include "vlb/rng.hpp"

namespace vlb {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Mat3 exp_so3(const Vec3& omega) {
  const double angle = omega.norm();
  if (angle < 1e-12) return Mat3::Identity() + skew(omega);
  return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}

// Polynomials are stored low order first.
using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

Poly poly_add(const Poly& a, const Poly& b, double scale_b = 1.0) {
  Poly out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += scale_b * b[i];
  return out;
}

Poly poly_scale(const Poly& a, double s) {
  Poly out = a;
  for (double& c : out) c *= s;
  return out;
}

double poly_eval(const Poly& p, double x) {
  double acc = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double poly_derivative_eval(const Poly& p, double x) {
  double acc = 0.0;
  for (std::size_t i = p.size() - 1; i >= 1; --i) {
    acc = acc * x + static_cast<double>(i) * p[i];
    if (i == 1) break;
  }
  return acc;
}

std::vector<double> real_roots(Poly p) {
  double scale = 0.0;
  for (double c : p) scale = std::max(scale, std::abs(c));
  if (scale == 0.0) return {};
  for (double& c : p) c /= scale;
  while (p.size() > 1 && std::abs(p.back()) < 1e-14) p.pop_back();
  const int degree = static_cast<int>(p.size()) - 1;
  if (degree < 1) return {};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 0; i < degree; ++i) companion(0, i) = -p[degree - 1 - i] / p[degree];
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);

  std::vector<double> roots;
  for (int i = 0; i < degree; ++i) {
    const std::complex<double> lambda = solver.eigenvalues()[i];
    if (std::abs(lambda.imag()) > 1e-6 * std::max(1.0, std::abs(lambda.real()))) continue;
    double x = lambda.real();
    for (int iter = 0; iter < 8; ++iter) {
      const double d = poly_derivative_eval(p, x);
      if (d == 0.0) break;
      const double step = poly_eval(p, x) / d;
      x -= step;
      if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(x))) break;
    }
    roots.push_back(x);
  }
  return roots;
}

struct CameraFromWorld {
  Mat3 rotation;
  Vec3 translation;
};

CameraFromWorld camera_from_world(const Pose& camera_pose) {
  const Mat3 r = camera_pose.rotation_matrix().transpose();
  return {r, -r * camera_pose.translation()};
}

Pose pose_from_camera_from_world(const Mat3& rotation, const Vec3& translation) {
  const Mat3 rt = rotation.transpose();
  // Re-orthonormalize before converting; the quaternion constructor assumes SO(3).
  Eigen::JacobiSVD<Mat3> svd(rt, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return Pose(-r * translation, r);
}

double squared_pixel_residual(const CameraFromWorld& cw, const CameraIntrinsics& k,
                              const Correspondence2D3D& c, bool& in_front) {
  const Vec3 xc = cw.rotation * c.point + cw.translation;
  in_front = xc.z() > 1e-9;
  if (!in_front) return std::numeric_limits<double>::infinity();
  const double u = k.focal_x * xc.x() / xc.z() + k.principal_x;
  const double v = k.focal_y * xc.y() / xc.z() + k.principal_y;
  const double du = u - c.pixel.x();
  const double dv = v - c.pixel.y();
  return du * du + dv * dv;
}

}  // namespace

Pose Pose::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return Pose(-(inv * translation_), inv);
}

Pose Pose::compose(const Pose& other) const {
  return Pose(rotation_ * other.translation_ + translation_, rotation_ * other.rotation_);
}

Eigen::Quaterniond yaw_rotation(double yaw) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
}

bool CameraIntrinsics::valid() const {
  return focal_x > 0.0 && focal_y > 0.0 && width > 0 && height > 0 && principal_x >= 0.0 &&
         principal_y >= 0.0 && principal_x < width && principal_y < height;
}

Vec3 CameraIntrinsics::bearing(const Vec2& pixel) const {
  return Vec3((pixel.x() - principal_x) / focal_x, (pixel.y() - principal_y) / focal_y, 1.0)
      .normalized();
}

std::optional<Vec2> project_unbounded(const Pose& camera_pose,
                                      const CameraIntrinsics& intrinsics, const Vec3& point) {
  const Vec3 xc = camera_pose.inverse_transform(point);
  if (xc.z() <= 0.0) return std::nullopt;
  return Vec2(intrinsics.focal_x * xc.x() / xc.z() + intrinsics.principal_x,
              intrinsics.focal_y * xc.y() / xc.z() + intrinsics.principal_y);
}

std::optional<Vec2> project(const Pose& camera_pose, const CameraIntrinsics& intrinsics,
                            const Vec3& point) {
  auto pixel = project_unbounded(camera_pose, intrinsics, point);
  if (!pixel || !intrinsics.contains(*pixel)) return std::nullopt;
  return pixel;
}

Vec3 triangulate(std::span<const ViewObservation> observations,
                 const CameraIntrinsics& intrinsics) {
  if (observations.size() < 2)
    throw Error(ErrorCode::InsufficientObservations, "triangulation needs at least two views");

  // Closest point to all rays: sum of (I - d d^T)(X - c) = 0.
  Mat3 normal = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (const auto& obs : observations) {
    const Vec3 dir = obs.camera_pose.rotation() * intrinsics.bearing(obs.pixel);
    const Mat3 proj = Mat3::Identity() - dir * dir.transpose();
    normal += proj;
    rhs += proj * obs.camera_pose.translation();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(normal);
  constexpr double kMinEigenvalue = 1e-9;
  if (eig.eigenvalues()(0) < kMinEigenvalue)
    throw Error(ErrorCode::DegenerateGeometry, "rays are (near) parallel");
  Vec3 point = normal.ldlt().solve(rhs);

  // Gauss-Newton on reprojection error.
  for (int iter = 0; iter < 10; ++iter) {
    Mat3 h = Mat3::Zero();
    Vec3 g = Vec3::Zero();
    int used = 0;
    for (const auto& obs : observations) {
      const CameraFromWorld cw = camera_from_world(obs.camera_pose);
      const Vec3 xc = cw.rotation * point + cw.translation;
      if (xc.z() <= 1e-9) continue;
      const double iz = 1.0 / xc.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << intrinsics.focal_x * iz, 0.0, -intrinsics.focal_x * xc.x() * iz * iz, 0.0,
          intrinsics.focal_y * iz, -intrinsics.focal_y * xc.y() * iz * iz;
      const Vec2 residual(intrinsics.focal_x * xc.x() * iz + intrinsics.principal_x -
                              obs.pixel.x(),
                          intrinsics.focal_y * xc.y() * iz + intrinsics.principal_y -
                              obs.pixel.y());
      const Eigen::Matrix<double, 2, 3> j = dproj * cw.rotation;
      h += j.transpose() * j;
      g += j.transpose() * residual;
      ++used;
    }
    if (used < 2) break;
    const Vec3 step = -h.ldlt().solve(g);
    if (!step.allFinite()) break;
    point += step;
    if (step.norm() < 1e-12 * std::max(1.0, point.norm())) break;
  }
  return point;
}

std::vector<Pose> solve_p3p(std::span<const Correspondence2D3D> correspondences,
                            const CameraIntrinsics& intrinsics) {
  if (correspondences.size() != 3)
    throw Error(ErrorCode::InvalidSpec, "P3P takes exactly three correspondences");
  const Vec3& p1 = correspondences[0].point;
  const Vec3& p2 = correspondences[1].point;
  const Vec3& p3 = correspondences[2].point;
  const double extent = std::max({(p2 - p1).norm(), (p3 - p1).norm(), (p3 - p2).norm()});
  if (extent == 0.0 || (p2 - p1).cross(p3 - p1).norm() < 1e-9 * extent * extent)
    throw Error(ErrorCode::DegenerateGeometry, "P3P points are collinear");

  const Vec3 j1 = intrinsics.bearing(correspondences[0].pixel);
  const Vec3 j2 = intrinsics.bearing(correspondences[1].pixel);
  const Vec3 j3 = intrinsics.bearing(correspondences[2].pixel);
  const double a2 = (p2 - p3).squaredNorm();
  const double b2 = (p1 - p3).squaredNorm();
  const double c2 = (p1 - p2).squaredNorm();
  const double cos_alpha = j2.dot(j3);
  const double cos_beta = j1.dot(j3);
  const double cos_gamma = j1.dot(j2);

  // With s2 = u s1 and s3 = v s1, the law-of-cosines system reduces to
  // u = N(v) / D(v) and a quartic in v.
  const Poly k = {1.0, -2.0 * cos_beta, 1.0};
  const Poly n = poly_add(poly_scale(k, a2 - c2), Poly{b2, 0.0, -b2});
  const Poly d = {2.0 * b2 * cos_gamma, -2.0 * b2 * cos_alpha};
  const Poly dd = poly_mul(d, d);
  Poly quartic = poly_scale(poly_add(dd, poly_mul(n, n)), b2);
  quartic = poly_add(quartic, poly_mul(n, d), -2.0 * b2 * cos_gamma);
  quartic = poly_add(quartic, poly_mul(k, dd), -c2);

  std::array<Vec3, 3> world = {p1, p2, p3};
  std::array<Vec3, 3> bearings = {j1, j2, j3};
  std::vector<Pose> solutions;
  for (const double v : real_roots(quartic)) {
    if (v <= 0.0) continue;
    const double denom = poly_eval(d, v);
    if (std::abs(denom) < 1e-14) continue;
    const double u = poly_eval(n, v) / denom;
    if (u <= 0.0) continue;
    const double kv = poly_eval(k, v);
    if (kv <= 0.0) continue;
    const double s1 = std::sqrt(b2 / kv);
    const std::array<double, 3> depth = {s1, u * s1, v * s1};

    Eigen::Matrix3d src, dst;
    for (int i = 0; i < 3; ++i) {
      src.col(i) = world[i];
      dst.col(i) = depth[i] * bearings[i];
    }
    const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
    Pose candidate = pose_from_camera_from_world(t.block<3, 3>(0, 0), t.block<3, 1>(0, 3));
    candidate = refine_pose(candidate, correspondences, intrinsics, 10, 1e-14);

    bool ok = true;
    for (const auto& c : correspondences) {
      if (!(reprojection_error(candidate, intrinsics, c) < 1e-6)) ok = false;
    }
    if (!ok) continue;
    const bool duplicate = std::any_of(solutions.begin(), solutions.end(), [&](const Pose& s) {
      return (s.translation() - candidate.translation()).norm() < 1e-9 &&
             s.rotation().angularDistance(candidate.rotation()) < 1e-9;
    });
    if (!duplicate) solutions.push_back(candidate);
  }
  return solutions;
}

double reprojection_error(const Pose& camera_pose, const CameraIntrinsics& intrinsics,
                          const Correspondence2D3D& correspondence) {
  const auto pixel = project_unbounded(camera_pose, intrinsics, correspondence.point);
  if (!pixel) return std::numeric_limits<double>::infinity();
  return (*pixel - correspondence.pixel).norm();
}

Pose refine_pose(const Pose& initial, std::span<const Correspondence2D3D> correspondences,
                 const CameraIntrinsics& intrinsics, int max_iterations,
                 double step_tolerance) {
  CameraFromWorld cw = camera_from_world(initial);
  auto cost_of = [&](const CameraFromWorld& state) {
    double cost = 0.0;
    for (const auto& c : correspondences) {
      bool in_front = false;
      cost += squared_pixel_residual(state, intrinsics, c, in_front);
    }
    return cost;
  };
  double cost = cost_of(cw);

  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  for (int iter = 0; iter < max_iterations; ++iter) {
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (const auto& c : correspondences) {
      const Vec3 xc = cw.rotation * c.point + cw.translation;
      if (xc.z() <= 1e-9) continue;
      const double iz = 1.0 / xc.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << intrinsics.focal_x * iz, 0.0, -intrinsics.focal_x * xc.x() * iz * iz, 0.0,
          intrinsics.focal_y * iz, -intrinsics.focal_y * xc.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dpoint;
      dpoint.block<3, 3>(0, 0) = -skew(xc);
      dpoint.block<3, 3>(0, 3) = Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> j = dproj * dpoint;
      const Vec2 residual(intrinsics.focal_x * xc.x() * iz + intrinsics.principal_x -
                              c.pixel.x(),
                          intrinsics.focal_y * xc.y() * iz + intrinsics.principal_y -
                              c.pixel.y());
      h += j.transpose() * j;
      g += j.transpose() * residual;
    }
    const Vec6 step = -h.ldlt().solve(g);
    if (!step.allFinite()) break;
    const Mat3 dr = exp_so3(step.head<3>());
    CameraFromWorld next{dr * cw.rotation, dr * cw.translation + step.tail<3>()};
    const double next_cost = cost_of(next);
    if (!(next_cost <= cost)) break;
    cw = next;
    cost = next_cost;
    if (step.norm() < step_tolerance) break;
  }
  return pose_from_camera_from_world(cw.rotation, cw.translation);
}

PnpResult ransac_pnp(std::span<const Correspondence2D3D> correspondences,
                     const CameraIntrinsics& intrinsics, const RansacParams& params) {
  if (!(params.inlier_threshold_px > 0.0))
    throw Error(ErrorCode::InvalidSpec, "inlier threshold must be positive");
  const std::size_t n = correspondences.size();
  if (n < 4)
    throw Error(ErrorCode::InsufficientCorrespondences,
                "need at least 4 correspondences, got " + std::to_string(n));

  const double threshold_sq = params.inlier_threshold_px * params.inlier_threshold_px;
  auto inliers_of = [&](const Pose& pose, double* cost) {
    const CameraFromWorld cw = camera_from_world(pose);
    std::vector<std::size_t> inliers;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      bool in_front = false;
      const double r2 = squared_pixel_residual(cw, intrinsics, correspondences[i], in_front);
      if (r2 < threshold_sq) {
        inliers.push_back(i);
        total += r2;
      } else {
        total += threshold_sq;
      }
    }
    if (cost) *cost = total;
    return inliers;
  };

  RandomStream rng(params.seed, StreamPurpose::Ransac);
  std::size_t best_count = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  std::optional<Pose> best_pose;
  long required = params.max_iterations;
  const auto n32 = static_cast<std::uint32_t>(n);

  for (long iter = 0; iter < std::min<long>(required, params.max_iterations); ++iter) {
    std::array<std::size_t, 4> sample{};
    for (int s = 0; s < 4; ++s) {
      for (;;) {
        const std::size_t idx = rng.uniform_index(n32);
        if (std::find(sample.begin(), sample.begin() + s, idx) == sample.begin() + s) {
          sample[s] = idx;
          break;
        }
      }
    }
    const std::array<Correspondence2D3D, 3> minimal = {
        correspondences[sample[0]], correspondences[sample[1]], correspondences[sample[2]]};
    std::vector<Pose> hypotheses;
    try {
      hypotheses = solve_p3p(minimal, intrinsics);
    } catch (const Error&) {
      continue;
    }
    const Pose* chosen = nullptr;
    double chosen_error = std::numeric_limits<double>::infinity();
    for (const Pose& h : hypotheses) {
      const double e = reprojection_error(h, intrinsics, correspondences[sample[3]]);
      if (e < chosen_error) {
        chosen_error = e;
        chosen = &h;
      }
    }
    if (!chosen) continue;

    double cost = 0.0;
    const auto inliers = inliers_of(*chosen, &cost);
    if (inliers.size() > best_count || (inliers.size() == best_count && cost < best_cost)) {
      best_count = inliers.size();
      best_cost = cost;
      best_pose = *chosen;
      const double w = static_cast<double>(best_count) / static_cast<double>(n);
      const double w4 = w * w * w * w;
      if (w4 >= 1.0) {
        required = 0;
      } else if (w4 > 0.0) {
        const double needed = std::log(1.0 - params.confidence) / std::log(1.0 - w4);
        required = static_cast<long>(std::min<double>(std::ceil(needed), params.max_iterations));
      }
    }
  }

  if (!best_pose || best_count < static_cast<std::size_t>(params.min_inliers))
    throw Error(ErrorCode::NoConsensus,
                "best hypothesis has " + std::to_string(best_count) + " inliers");

  Pose pose = *best_pose;
  std::vector<std::size_t> inliers = inliers_of(pose, nullptr);
  for (int round = 0; round < 4; ++round) {
    std::vector<Correspondence2D3D> subset;
    subset.reserve(inliers.size());
    for (std::size_t i : inliers) subset.push_back(correspondences[i]);
    const Pose refined = refine_pose(pose, subset, intrinsics, params.refine_max_iterations,
                                     params.refine_step_tolerance);
    auto refined_inliers = inliers_of(refined, nullptr);
    if (refined_inliers.size() < static_cast<std::size_t>(params.min_inliers) ||
        refined_inliers.size() < inliers.size())
      break;
    const bool stable = refined_inliers == inliers;
    pose = refined;
    inliers = std::move(refined_inliers);
    if (stable) break;
  }
  return {pose, std::move(inliers)};
}

PoseError pose_error(const Pose& estimate, const Pose& truth) {
  const Eigen::Quaterniond rel = estimate.rotation().conjugate() * truth.rotation();
  const double angle = 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  return {(estimate.translation() - truth.translation()).norm(), angle * kRadToDeg};
}

}  // namespace vlb
