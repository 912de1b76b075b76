#include "vlb/vloc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vlb/error.hpp"

namespace vlb {

GlobalDescriptorModel::GlobalDescriptorModel(std::uint64_t seed, int global_dim, int local_dim)
    : seed_(seed), projection_(global_dim, local_dim) {
  if (global_dim < 1 || local_dim < 1)
    throw Error(ErrorCode::InvalidSpec, "descriptor dimensions must be positive");
  RandomStream rng(seed, StreamPurpose::DescriptorProjection);
  const double scale = 1.0 / std::sqrt(static_cast<double>(global_dim));
  for (int c = 0; c < local_dim; ++c)
    for (int r = 0; r < global_dim; ++r) projection_(r, c) = scale * rng.normal();
}

Eigen::VectorXd GlobalDescriptorModel::compute(std::span<const Descriptor> descriptors) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(projection_.cols());
  for (const Descriptor& d : descriptors) sum += d;
  Eigen::VectorXd g = projection_ * sum;
  const double n = g.norm();
  if (!(n > 1e-12)) {
    g.setZero();
    g[0] = 1.0;
    return g;
  }
  return g / n;
}

Eigen::VectorXd GlobalDescriptorModel::compute(const std::vector<Detection>& detections) const {
  std::vector<Descriptor> descriptors;
  descriptors.reserve(detections.size());
  for (const Detection& d : detections) descriptors.push_back(d.descriptor);
  return compute(descriptors);
}

GalleryMap::GalleryMap(std::vector<Keyframe> keyframes, std::map<LandmarkId, Point3D> points,
                       GlobalDescriptorModel model, CameraIntrinsics intrinsics,
                       std::uint64_t world_seed)
    : keyframes_(std::move(keyframes)),
      points_(std::move(points)),
      model_(std::move(model)),
      intrinsics_(intrinsics),
      world_seed_(world_seed) {
  if (keyframes_.empty()) throw Error(ErrorCode::EmptyGallery, "gallery has no keyframes");
  for (std::size_t i = 0; i < keyframes_.size(); ++i) {
    if (keyframes_[i].id != i) throw Error(ErrorCode::InvalidSpec, "keyframe ids must be 0..n-1");
  }
  covisibility_.assign(keyframes_.size(), {});
  for (const auto& [id, point] : points_) {
    if (point.observing_keyframes.size() < 2)
      throw Error(ErrorCode::InvalidSpec, "3D point observed by fewer than two keyframes");
    const auto& obs = point.observing_keyframes;
    for (std::size_t a = 0; a < obs.size(); ++a) {
      if (obs[a] >= keyframes_.size()) throw Error(ErrorCode::InvalidSpec, "unknown keyframe id");
      for (std::size_t b = 0; b < obs.size(); ++b)
        if (a != b) covisibility_[obs[a]].push_back(obs[b]);
    }
  }
  for (auto& adj : covisibility_) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
}

bool GalleryMap::covisible(KeyframeId a, KeyframeId b) const {
  const auto& adj = covisibility_.at(a);
  return std::binary_search(adj.begin(), adj.end(), b);
}

GalleryMap build_gallery(const WorldMap& world, const Route& route, const GalleryParams& params,
                         const DegradationModel& degradation) {
  if (!(params.spacing > 0.0)) throw Error(ErrorCode::InvalidSpec, "gallery spacing must be positive");
  const double length = route.total_length();
  if (!(length > 0.0)) throw Error(ErrorCode::EmptyGallery, "route is empty");

  const GlobalDescriptorModel model(params.seed, params.global_dim, world.spec.descriptor_dim);
  const std::size_t count = static_cast<std::size_t>(std::floor(length / params.spacing + 1e-9)) + 1;
  std::vector<Keyframe> keyframes;
  keyframes.reserve(count);
  std::map<LandmarkId, std::vector<std::pair<KeyframeId, Vec2>>> tracks;

  EnvironmentCondition pristine;
  pristine.camera_offset_z = params.mount.offset_z;
  pristine.camera_pitch_deg = params.mount.pitch_deg;
  for (std::size_t i = 0; i < count; ++i) {
    const RoutePoint rp = route.point_at(static_cast<double>(i) * params.spacing);
    const VehicleState vehicle{rp.position.x(), rp.position.y(), rp.heading, 0.0};
    Keyframe kf;
    kf.id = static_cast<KeyframeId>(i);
    kf.pose = mounted_camera_pose(vehicle, params.mount);
    RandomStream rng(params.seed, StreamPurpose::Gallery, kf.id);
    const QueryObservation obs =
        observe(world, kf.pose, params.intrinsics, pristine, degradation, rng);
    kf.detections.reserve(obs.detections.size());
    std::vector<Descriptor> descriptors;
    descriptors.reserve(obs.detections.size());
    for (const Detection& d : obs.detections) {
      kf.detections.push_back({d.pixel, d.descriptor, d.debug_landmark_id});
      descriptors.push_back(d.descriptor);
      tracks[d.debug_landmark_id].emplace_back(kf.id, d.pixel);
    }
    kf.global_descriptor = model.compute(descriptors);
    keyframes.push_back(std::move(kf));
  }

  std::map<LandmarkId, Point3D> points;
  std::vector<ViewObservation> views;
  for (const auto& [id, track] : tracks) {
    if (track.size() < 2) continue;
    views.clear();
    for (const auto& [kf, pixel] : track) views.push_back({keyframes[kf].pose, pixel});
    Point3D p;
    try {
      p.position = triangulate(views, params.intrinsics);
    } catch (const Error&) {
      continue;
    }
    for (const auto& [kf, pixel] : track) p.observing_keyframes.push_back(kf);
    points.emplace(id, std::move(p));
  }
  return GalleryMap(std::move(keyframes), std::move(points), model, params.intrinsics, world.seed);
}

std::vector<KeyframeId> retrieve(const GalleryMap& gallery, const Eigen::VectorXd& query,
                                 int top_k) {
  if (top_k < 1) throw Error(ErrorCode::InvalidSpec, "top_k must be at least 1");
  const auto& kfs = gallery.keyframes();
  std::vector<std::pair<double, KeyframeId>> scored;
  scored.reserve(kfs.size());
  for (const Keyframe& kf : kfs) scored.emplace_back(kf.global_descriptor.dot(query), kf.id);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), scored.size());
  auto better = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    better);
  std::vector<KeyframeId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(scored[i].second);
  return out;
}

std::vector<std::vector<KeyframeId>> covis_cluster(const GalleryMap& gallery,
                                                   std::span<const KeyframeId> ids) {
  std::vector<KeyframeId> nodes(ids.begin(), ids.end());
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  std::vector<std::size_t> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = a + 1; b < nodes.size(); ++b)
      if (gallery.covisible(nodes[a], nodes[b])) parent[find(a)] = find(b);

  std::map<std::size_t, std::vector<KeyframeId>> groups;
  for (std::size_t i = 0; i < nodes.size(); ++i) groups[find(i)].push_back(nodes[i]);
  std::vector<std::vector<KeyframeId>> clusters;
  for (auto& [root, members] : groups) clusters.push_back(std::move(members));
  std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
    return a.size() > b.size() || (a.size() == b.size() && a.front() < b.front());
  });
  return clusters;
}

std::vector<std::pair<std::size_t, std::size_t>> match_nn_ratio(
    const Eigen::MatrixXd& query, const Eigen::MatrixXd& gallery, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidSpec, "ratio must be in (0, 1)");
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  const Eigen::Index nq = query.rows();
  const Eigen::Index ng = gallery.rows();
  if (nq == 0 || ng < 2) return matches;

  // Squared distances without assuming unit rows.
  const Eigen::VectorXd qn = query.rowwise().squaredNorm();
  const Eigen::VectorXd gn = gallery.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * query * gallery.transpose();
  d2.colwise() += qn;
  d2.rowwise() += gn.transpose();

  std::vector<Eigen::Index> best_query_for(static_cast<std::size_t>(ng), -1);
  for (Eigen::Index g = 0; g < ng; ++g) {
    Eigen::Index best = 0;
    for (Eigen::Index q = 1; q < nq; ++q)
      if (d2(q, g) < d2(best, g)) best = q;
    best_query_for[static_cast<std::size_t>(g)] = best;
  }
  for (Eigen::Index q = 0; q < nq; ++q) {
    Eigen::Index first = -1;
    double d1 = std::numeric_limits<double>::infinity();
    double d2nd = std::numeric_limits<double>::infinity();
    for (Eigen::Index g = 0; g < ng; ++g) {
      const double d = d2(q, g);
      if (d < d1) {
        d2nd = d1;
        d1 = d;
        first = g;
      } else if (d < d2nd) {
        d2nd = d;
      }
    }
    const double r1 = std::sqrt(std::max(0.0, d1));
    const double r2 = std::sqrt(std::max(0.0, d2nd));
    if (!(r1 < ratio * r2)) continue;
    if (best_query_for[static_cast<std::size_t>(first)] != q) continue;
    matches.emplace_back(static_cast<std::size_t>(q), static_cast<std::size_t>(first));
  }
  return matches;
}

std::optional<PoseEstimate> localize(const GalleryMap& gallery, const QueryObservation& observation,
                                     const LocalizationParams& params) {
  const auto& detections = observation.detections;
  if (detections.size() < 4) return std::nullopt;
  const Eigen::VectorXd g = gallery.descriptor_model().compute(detections);
  const std::vector<KeyframeId> retrieved = retrieve(gallery, g, params.top_k);
  const auto clusters = covis_cluster(gallery, retrieved);

  const Eigen::Index dim = detections.front().descriptor.size();
  Eigen::MatrixXd query(static_cast<Eigen::Index>(detections.size()), dim);
  for (std::size_t i = 0; i < detections.size(); ++i)
    query.row(static_cast<Eigen::Index>(i)) = detections[i].descriptor.transpose();

  std::optional<PoseEstimate> best;
  std::size_t best_cluster_size = 0;
  std::vector<LandmarkId> ids;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    // Match against each keyframe of the cluster separately and pool the
    // resulting 2D-3D correspondences.
    std::vector<Correspondence2D3D> corr;
    for (KeyframeId kid : clusters[c]) {
      const Keyframe& kf = gallery.keyframe(kid);
      ids.clear();
      Eigen::MatrixXd reps(static_cast<Eigen::Index>(kf.detections.size()), dim);
      for (const GalleryDetection& d : kf.detections) {
        if (!gallery.points().contains(d.landmark_id)) continue;
        reps.row(static_cast<Eigen::Index>(ids.size())) = d.descriptor.transpose();
        ids.push_back(d.landmark_id);
      }
      if (ids.size() < 2) continue;
      reps.conservativeResize(static_cast<Eigen::Index>(ids.size()), Eigen::NoChange);
      for (const auto& [qi, gi] : match_nn_ratio(query, reps, params.ratio))
        corr.push_back({detections[qi].pixel, gallery.points().at(ids[gi]).position, ids[gi]});
    }
    if (corr.size() < 4) continue;

    RansacParams rp = params.ransac;
    rp.seed = params.ransac.seed * 16 + c;
    PnpResult pnp;
    try {
      pnp = ransac_pnp(corr, gallery.intrinsics(), rp);
    } catch (const Error&) {
      continue;
    }
    const std::size_t n = pnp.inliers.size();
    const bool better = !best || n > best->num_inliers ||
                        (n == best->num_inliers && clusters[c].size() > best_cluster_size);
    if (better) {
      best = PoseEstimate{pnp.pose, n, c, observation.timestamp, 0.0};
      best_cluster_size = clusters[c].size();
    }
  }
  return best;
}

}  // namespace vlb
