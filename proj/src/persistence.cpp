#include "vlb/persistence.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <boost/crc.hpp>
#include <json.hpp>

#include "vlb/error.hpp"

namespace vlb {

static_assert(std::endian::native == std::endian::little, "gallery format assumes little endian");

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Binary helpers.
class Writer {
 public:
  template <typename T>
  void put(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&value);
    buffer_.append(p, sizeof(T));
  }
  void put_vec(const Eigen::VectorXd& v) {
    put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
    buffer_.append(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size());
  }
  void put_pose(const Pose& p) {
    put(p.translation().x());
    put(p.translation().y());
    put(p.translation().z());
    put(p.rotation().w());
    put(p.rotation().x());
    put(p.rotation().y());
    put(p.rotation().z());
  }
  std::string& buffer() { return buffer_; }

 private:
  std::string buffer_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : data_(data), size_(size) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  Eigen::VectorXd get_vec() {
    const auto n = get<std::uint32_t>();
    need(sizeof(double) * n);
    Eigen::VectorXd v(n);
    std::memcpy(v.data(), data_ + pos_, sizeof(double) * n);
    pos_ += sizeof(double) * n;
    return v;
  }
  Pose get_pose() {
    const double tx = get<double>(), ty = get<double>(), tz = get<double>();
    const double w = get<double>(), x = get<double>(), y = get<double>(), z = get<double>();
    return Pose(Vec3(tx, ty, tz), Eigen::Quaterniond(w, x, y, z));
  }
  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw Error(ErrorCode::IoError, "gallery file truncated");
  }
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

constexpr char kGalleryMagic[8] = {'V', 'L', 'B', 'G', 'A', 'L', 'R', 'Y'};

}  // namespace

void save_world(const WorldMap& world, const std::filesystem::path& path) {
  const WorldSpec& s = world.spec;
  const FacadeParams& f = s.facade;
  json j;
  j["format"] = "vlocbench-world";
  j["version"] = kWorldFormatVersion;
  j["seed"] = world.seed;
  j["spec"] = {{"route_shape", s.route_shape},
               {"landmark_density", s.landmark_density},
               {"seed", s.seed},
               {"corner_radius", s.corner_radius},
               {"descriptor_dim", s.descriptor_dim},
               {"facade",
                {{"near_offset", f.near_offset},
                 {"near_offset_jitter", f.near_offset_jitter},
                 {"near_height_min", f.near_height_min},
                 {"near_height_max", f.near_height_max},
                 {"far_fraction", f.far_fraction},
                 {"far_offset_min", f.far_offset_min},
                 {"far_offset_max", f.far_offset_max},
                 {"far_height_min", f.far_height_min},
                 {"far_height_max", f.far_height_max},
                 {"module_width", f.module_width},
                 {"template_count", f.template_count},
                 {"repeat_probability", f.repeat_probability},
                 {"instance_sigma", f.instance_sigma},
                 {"min_clearance", f.min_clearance}}}};
  json route = json::array();
  for (const RoutePoint& p : world.route.waypoints())
    route.push_back({p.position.x(), p.position.y(), p.heading});
  j["route"] = std::move(route);
  json landmarks = json::array();
  for (const Landmark& lm : world.landmarks) {
    landmarks.push_back({{"id", lm.id},
                         {"position", vec_json(lm.position)},
                         {"facing", vec_json(lm.facing)},
                         {"descriptor", vec_json(lm.canonical_descriptor)}});
  }
  j["landmarks"] = std::move(landmarks);
  write_file(path, j.dump() + "\n");
}

WorldMap load_world(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, "malformed world file: " + std::string(e.what()));
  }
  if (j.value("format", "") != "vlocbench-world")
    throw Error(ErrorCode::IoError, path.string() + " is not a world file");
  if (j.value("version", -1) != kWorldFormatVersion)
    throw Error(ErrorCode::SchemaVersion, "unsupported world file version");
  try {
    WorldMap world;
    world.seed = j.at("seed").get<std::uint64_t>();
    const json& s = j.at("spec");
    world.spec.route_shape = s.at("route_shape").get<std::string>();
    world.spec.landmark_density = s.at("landmark_density").get<double>();
    world.spec.seed = s.at("seed").get<std::uint64_t>();
    world.spec.corner_radius = s.at("corner_radius").get<double>();
    world.spec.descriptor_dim = s.at("descriptor_dim").get<int>();
    const json& f = s.at("facade");
    FacadeParams& fp = world.spec.facade;
    fp.near_offset = f.at("near_offset").get<double>();
    fp.near_offset_jitter = f.at("near_offset_jitter").get<double>();
    fp.near_height_min = f.at("near_height_min").get<double>();
    fp.near_height_max = f.at("near_height_max").get<double>();
    fp.far_fraction = f.at("far_fraction").get<double>();
    fp.far_offset_min = f.at("far_offset_min").get<double>();
    fp.far_offset_max = f.at("far_offset_max").get<double>();
    fp.far_height_min = f.at("far_height_min").get<double>();
    fp.far_height_max = f.at("far_height_max").get<double>();
    fp.module_width = f.at("module_width").get<double>();
    fp.template_count = f.at("template_count").get<int>();
    fp.repeat_probability = f.at("repeat_probability").get<double>();
    fp.instance_sigma = f.at("instance_sigma").get<double>();
    fp.min_clearance = f.at("min_clearance").get<double>();

    std::vector<RoutePoint> wps;
    for (const json& p : j.at("route"))
      wps.push_back({Vec2(p.at(0).get<double>(), p.at(1).get<double>()), p.at(2).get<double>()});
    world.route = Route(std::move(wps));
    for (const json& l : j.at("landmarks")) {
      Landmark lm;
      lm.id = l.at("id").get<LandmarkId>();
      lm.position = json_vec(l.at("position"));
      lm.facing = json_vec(l.at("facing"));
      lm.canonical_descriptor = json_vec(l.at("descriptor"));
      if (lm.id != world.landmarks.size())
        throw Error(ErrorCode::IoError, "landmark ids must be sequential");
      world.landmarks.push_back(std::move(lm));
    }
    return world;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, "malformed world file: " + std::string(e.what()));
  }
}

void save_gallery(const GalleryMap& gallery, const std::filesystem::path& path) {
  Writer w;
  const CameraIntrinsics& k = gallery.intrinsics();
  w.put<std::uint64_t>(gallery.world_seed());
  w.put<std::uint64_t>(gallery.descriptor_model().seed());
  w.put<std::int32_t>(gallery.descriptor_model().global_dim());
  w.put<std::int32_t>(gallery.descriptor_model().local_dim());
  for (double v : {k.focal_x, k.focal_y, k.principal_x, k.principal_y}) w.put(v);
  w.put<std::int32_t>(k.width);
  w.put<std::int32_t>(k.height);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(gallery.keyframes().size()));
  for (const Keyframe& kf : gallery.keyframes()) {
    w.put<std::uint32_t>(kf.id);
    w.put_pose(kf.pose);
    w.put_vec(kf.global_descriptor);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(kf.detections.size()));
    for (const GalleryDetection& d : kf.detections) {
      w.put(d.pixel.x());
      w.put(d.pixel.y());
      w.put<std::uint32_t>(d.landmark_id);
      w.put_vec(d.descriptor);
    }
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(gallery.points().size()));
  for (const auto& [id, p] : gallery.points()) {
    w.put<std::uint32_t>(id);
    w.put(p.position.x());
    w.put(p.position.y());
    w.put(p.position.z());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.observing_keyframes.size()));
    for (KeyframeId kid : p.observing_keyframes) w.put<std::uint32_t>(kid);
  }

  const std::string& payload = w.buffer();
  boost::crc_32_type crc;
  crc.process_bytes(payload.data(), payload.size());
  Writer file;
  file.buffer().append(kGalleryMagic, sizeof(kGalleryMagic));
  file.put<std::uint32_t>(kGalleryFormatVersion);
  file.put<std::uint64_t>(payload.size());
  file.put<std::uint32_t>(crc.checksum());
  file.buffer() += payload;
  write_file(path, file.buffer());
}

GalleryMap load_gallery(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  Reader header(data.data(), data.size());
  constexpr std::size_t header_size = sizeof(kGalleryMagic) + 4 + 8 + 4;
  if (data.size() < header_size || std::memcmp(data.data(), kGalleryMagic, sizeof(kGalleryMagic)))
    throw Error(ErrorCode::IoError, path.string() + " is not a gallery file");
  for (std::size_t i = 0; i < sizeof(kGalleryMagic); ++i) header.get<char>();
  if (header.get<std::uint32_t>() != kGalleryFormatVersion)
    throw Error(ErrorCode::SchemaVersion, "unsupported gallery file version");
  const auto size = header.get<std::uint64_t>();
  const auto expected_crc = header.get<std::uint32_t>();
  if (data.size() - header_size != size) throw Error(ErrorCode::IoError, "gallery file truncated");
  boost::crc_32_type crc;
  crc.process_bytes(data.data() + header_size, size);
  if (crc.checksum() != expected_crc)
    throw Error(ErrorCode::ChecksumMismatch, "gallery payload checksum mismatch");

  Reader r(data.data() + header_size, size);
  const auto world_seed = r.get<std::uint64_t>();
  const auto model_seed = r.get<std::uint64_t>();
  const auto global_dim = r.get<std::int32_t>();
  const auto local_dim = r.get<std::int32_t>();
  CameraIntrinsics k;
  k.focal_x = r.get<double>();
  k.focal_y = r.get<double>();
  k.principal_x = r.get<double>();
  k.principal_y = r.get<double>();
  k.width = r.get<std::int32_t>();
  k.height = r.get<std::int32_t>();
  std::vector<Keyframe> keyframes(r.get<std::uint32_t>());
  for (Keyframe& kf : keyframes) {
    kf.id = r.get<std::uint32_t>();
    kf.pose = r.get_pose();
    kf.global_descriptor = r.get_vec();
    kf.detections.resize(r.get<std::uint32_t>());
    for (GalleryDetection& d : kf.detections) {
      d.pixel.x() = r.get<double>();
      d.pixel.y() = r.get<double>();
      d.landmark_id = r.get<std::uint32_t>();
      d.descriptor = r.get_vec();
    }
  }
  std::map<LandmarkId, Point3D> points;
  const auto point_count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < point_count; ++i) {
    const auto id = r.get<std::uint32_t>();
    Point3D p;
    p.position.x() = r.get<double>();
    p.position.y() = r.get<double>();
    p.position.z() = r.get<double>();
    p.observing_keyframes.resize(r.get<std::uint32_t>());
    for (KeyframeId& kid : p.observing_keyframes) kid = r.get<std::uint32_t>();
    points.emplace(id, std::move(p));
  }
  if (!r.done()) throw Error(ErrorCode::IoError, "trailing bytes in gallery file");
  return GalleryMap(std::move(keyframes), std::move(points),
                    GlobalDescriptorModel(model_seed, global_dim, local_dim), k, world_seed);
}

}  // namespace vlb
