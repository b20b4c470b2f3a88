#pragma once

#include <filesystem>
#include <iosfwd>

#include "viewgrasp/projection.hpp"

namespace viewgrasp {

/// DVIEW text format: a header line "DVIEW <k> <plane_side_m> <mode>" then k
/// rows of k space-separated depths (row 0 first), all at 9 significant
/// digits. The camera pose is not stored; a loaded view carries an identity
/// pose with the stored plane side and bin count.
void write_dview(std::ostream& out, const DepthView<double>& view);
DepthView<double> read_dview(std::istream& in);

void save_dview(const std::filesystem::path& path, const DepthView<double>& view);
DepthView<double> load_dview(const std::filesystem::path& path);

/// Shared "%.9g" formatting used by every text format in the project.
std::string format_g9(double value);

}  // namespace viewgrasp
