#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "viewgrasp/geometry.hpp"

namespace viewgrasp {

enum class CloudFormat { XyzAscii, PlyAscii };

/// Picks the format from the file extension (.ply, otherwise xyz).
CloudFormat format_from_path(const std::filesystem::path& path);

/// xyz-ascii: one "x y z [nx ny nz]" record per line; blank lines and lines
/// starting with '#' are skipped. Every record must have the same arity.
/// ply-ascii: vertex element with x/y/z and optional nx/ny/nz properties;
/// any other properties and elements are ignored.
PointCloud read_cloud(std::istream& in, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);

/// Writes xyz-ascii with 9 significant digits; normals appended when present.
void write_xyz(std::ostream& out, const PointCloud& cloud);
void save_xyz(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace viewgrasp
