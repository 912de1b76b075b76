#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vlb/geometry.hpp"
#include "vlb/world.hpp"

namespace vlb {

using KeyframeId = std::uint32_t;

struct GalleryDetection {
  Vec2 pixel = Vec2::Zero();
  Descriptor descriptor;
  LandmarkId landmark_id = 0;
};

struct Keyframe {
  KeyframeId id = 0;
  Pose pose;
  std::vector<GalleryDetection> detections;
  Eigen::VectorXd global_descriptor;
};

struct Point3D {
  Vec3 position = Vec3::Zero();
  std::vector<KeyframeId> observing_keyframes;  // ascending
};

/// Fixed random projection that aggregates local descriptors into one global
/// descriptor per image.
class GlobalDescriptorModel {
 public:
  GlobalDescriptorModel() = default;
  GlobalDescriptorModel(std::uint64_t seed, int global_dim, int local_dim);

  /// normalize(P * sum(descriptors)); the first basis vector when empty or zero.
  Eigen::VectorXd compute(std::span<const Descriptor> descriptors) const;
  Eigen::VectorXd compute(const std::vector<Detection>& detections) const;

  std::uint64_t seed() const { return seed_; }
  int global_dim() const { return static_cast<int>(projection_.rows()); }
  int local_dim() const { return static_cast<int>(projection_.cols()); }

 private:
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd projection_;
};

struct GalleryParams {
  double spacing = 2.0;  // meters between keyframes
  CameraMount mount;
  CameraIntrinsics intrinsics;
  int global_dim = 256;
  std::uint64_t seed = 1;  // projection matrix and capture noise
};

class GalleryMap {
 public:
  GalleryMap() = default;
  GalleryMap(std::vector<Keyframe> keyframes, std::map<LandmarkId, Point3D> points,
             GlobalDescriptorModel model, CameraIntrinsics intrinsics, std::uint64_t world_seed);

  const std::vector<Keyframe>& keyframes() const { return keyframes_; }
  const Keyframe& keyframe(KeyframeId id) const { return keyframes_.at(id); }
  const std::map<LandmarkId, Point3D>& points() const { return points_; }
  /// Sorted neighbour ids of a keyframe.
  const std::vector<KeyframeId>& covisible(KeyframeId id) const { return covisibility_.at(id); }
  bool covisible(KeyframeId a, KeyframeId b) const;
  const GlobalDescriptorModel& descriptor_model() const { return model_; }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  std::uint64_t world_seed() const { return world_seed_; }
  std::size_t size() const { return keyframes_.size(); }

 private:
  std::vector<Keyframe> keyframes_;
  std::map<LandmarkId, Point3D> points_;
  std::vector<std::vector<KeyframeId>> covisibility_;
  GlobalDescriptorModel model_;
  CameraIntrinsics intrinsics_;
  std::uint64_t world_seed_ = 0;
};

/// Captures keyframes along the route under pristine conditions, triangulates
/// every landmark seen from two or more keyframes from the known poses and
/// builds the covisibility graph. Throws EmptyGallery when nothing is captured.
GalleryMap build_gallery(const WorldMap& world, const Route& route, const GalleryParams& params,
                         const DegradationModel& degradation = {});

/// Top `top_k` keyframes by cosine similarity, ties by ascending id.
std::vector<KeyframeId> retrieve(const GalleryMap& gallery, const Eigen::VectorXd& query,
                                 int top_k);

/// Connected components of the covisibility graph restricted to `ids`, sorted
/// by size (descending) then smallest member.
std::vector<std::vector<KeyframeId>> covis_cluster(const GalleryMap& gallery,
                                                   std::span<const KeyframeId> ids);

/// Lowe ratio test followed by mutual nearest neighbour filtering. Rows of
/// both matrices are unit descriptors. Returns (query row, gallery row).
std::vector<std::pair<std::size_t, std::size_t>> match_nn_ratio(
    const Eigen::MatrixXd& query, const Eigen::MatrixXd& gallery, double ratio);

struct LocalizationParams {
  int top_k = 5;
  double ratio = 0.8;
  RansacParams ransac;
};

struct PoseEstimate {
  Pose pose;
  std::size_t num_inliers = 0;
  std::size_t cluster_id = 0;
  double query_timestamp = 0.0;
  double latency = 0.0;
};

/// Hierarchical localization of one query. Empty when every cluster fails.
std::optional<PoseEstimate> localize(const GalleryMap& gallery, const QueryObservation& observation,
                                     const LocalizationParams& params);

}  // namespace vlb
