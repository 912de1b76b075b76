#pragma once

#include <filesystem>

#include "vlb/vloc.hpp"
#include "vlb/world.hpp"

namespace vlb {

inline constexpr int kWorldFormatVersion = 1;
inline constexpr int kGalleryFormatVersion = 1;

/// World file: JSON text with the generating spec, the route polyline and the
/// landmark table. Throws IoError / SchemaVersion.
void save_world(const WorldMap& world, const std::filesystem::path& path);
WorldMap load_world(const std::filesystem::path& path);

/// Gallery file: little-endian binary with a magic header, a format version
/// and a CRC-32 of the payload. Throws IoError, SchemaVersion or
/// ChecksumMismatch.
void save_gallery(const GalleryMap& gallery, const std::filesystem::path& path);
GalleryMap load_gallery(const std::filesystem::path& path);

}  // namespace vlb
