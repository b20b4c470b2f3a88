#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "viewgrasp/depth_view_io.hpp"

namespace viewgrasp {

std::string_view to_string(SetupKind kind) {
  switch (kind) {
    case SetupKind::Orthographic: return "orthographic";
    case SetupKind::Orbit: return "orbit";
    case SetupKind::Sphere: return "sphere";
  }
  return "?";
}

std::string_view to_string(ProjectionMode mode) {
  return mode == ProjectionMode::FixedSize ? "fixed-size" : "scale-invariant";
}

SetupKind parse_setup_kind(std::string_view text) {
  if (text == "orthographic") return SetupKind::Orthographic;
  if (text == "orbit") return SetupKind::Orbit;
  if (text == "sphere") return SetupKind::Sphere;
  fail(ErrorKind::Argument, "unknown view setup '" + std::string(text) + "'");
}

ProjectionMode parse_projection_mode(std::string_view text) {
  if (text == "scale-invariant") return ProjectionMode::ScaleInvariant;
  if (text == "fixed-size") return ProjectionMode::FixedSize;
  fail(ErrorKind::Argument, "unknown projection mode '" + std::string(text) + "'");
}

std::string format_g9(double value) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.9g", value);
  return std::string(buf, static_cast<std::size_t>(len));
}

void write_dview(std::ostream& out, const DepthView<double>& view) {
  const int k = view.bins();
  out << "DVIEW " << k << ' ' << format_g9(view.camera.plane_side) << ' ' << to_string(view.mode) << '\n';
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) {
      if (c) out << ' ';
      out << format_g9(view.grid(r, c));
    }
    out << '\n';
  }
}

DepthView<double> read_dview(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Format, "DVIEW: missing header");
  std::istringstream header(line);
  std::string magic, mode;
  int k = 0;
  double side = 0.0;
  header >> magic >> k >> side >> mode;
  require(header && magic == "DVIEW" && k > 0, ErrorKind::Format, "DVIEW: malformed header '" + line + "'");
  std::string extra;
  require(!(header >> extra), ErrorKind::Format, "DVIEW: trailing header tokens");

  DepthView<double> view;
  view.mode = parse_projection_mode(mode);
  view.camera.plane_side = side;
  view.camera.bins = k;
  view.grid.resize(k, k);
  for (int r = 0; r < k; ++r) {
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Format,
            "DVIEW: missing row " + std::to_string(r));
    std::istringstream row(line);
    for (int c = 0; c < k; ++c) {
      double v = 0.0;
      require(static_cast<bool>(row >> v), ErrorKind::Format,
              "DVIEW: row " + std::to_string(r) + " has fewer than " + std::to_string(k) + " values");
      require(v >= 0.0, ErrorKind::Format, "DVIEW: negative depth in row " + std::to_string(r));
      view.grid(r, c) = v;
    }
    require(!(row >> extra), ErrorKind::Format, "DVIEW: row " + std::to_string(r) + " has extra values");
  }
  return view;
}

void save_dview(const std::filesystem::path& path, const DepthView<double>& view) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  write_dview(out, view);
}

DepthView<double> load_dview(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  return read_dview(in);
}

}  // namespace viewgrasp
