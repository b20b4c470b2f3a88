#include "viewgrasp/cloud_io.hpp"

#include <algorithm>
#include <cctype>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace viewgrasp {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_number(std::string_view token, std::size_t line_no) {
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": invalid number '" +
                               std::string(token) + "'");
  }
  return value;
}

PointCloud assemble(const std::vector<Eigen::Vector3d>& pts, const std::vector<Eigen::Vector3d>& nrm) {
  require(!pts.empty(), ErrorKind::EmptyCloud, "cloud file contains no points");
  Points3<double> p(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) p.col(static_cast<Eigen::Index>(i)) = pts[i];
  if (nrm.empty()) return PointCloud(std::move(p));
  Points3<double> n(3, p.cols());
  for (std::size_t i = 0; i < nrm.size(); ++i) {
    const double len = nrm[i].norm();
    require(len > 1e-12, ErrorKind::Parse, "point " + std::to_string(i) + " has a zero normal");
    n.col(static_cast<Eigen::Index>(i)) = nrm[i] / len;
  }
  return PointCloud(std::move(p), std::move(n));
}

PointCloud read_xyz(std::istream& in) {
  std::vector<Eigen::Vector3d> pts;
  std::vector<Eigen::Vector3d> nrm;
  std::size_t arity = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens.front().front() == '#') continue;
    if (tokens.size() != 3 && tokens.size() != 6) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected 3 or 6 values, got " +
                                 std::to_string(tokens.size()));
    }
    if (arity == 0) arity = tokens.size();
    if (tokens.size() != arity) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": inconsistent column count");
    }
    pts.emplace_back(parse_number(tokens[0], line_no), parse_number(tokens[1], line_no),
                     parse_number(tokens[2], line_no));
    if (arity == 6) {
      nrm.emplace_back(parse_number(tokens[3], line_no), parse_number(tokens[4], line_no),
                       parse_number(tokens[5], line_no));
    }
  }
  return assemble(pts, nrm);
}

PointCloud read_ply(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next() || line != "ply") fail(ErrorKind::Parse, "line 1: missing 'ply' magic");

  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::vector<std::string> props;
  bool header_done = false;
  while (next()) {
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "format") {
      if (tokens.size() < 2 || tokens[1] != "ascii") {
        fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": only ascii ply is supported");
      }
    } else if (tokens[0] == "element") {
      if (tokens.size() != 3) fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bad element");
      in_vertex = tokens[1] == "vertex";
      if (in_vertex) {
        // Vertex element must come first so its rows lead the body.
        if (seen_vertex || !props.empty()) {
          fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": unsupported element order");
        }
        seen_vertex = true;
        vertex_count = static_cast<std::size_t>(parse_number(tokens[2], line_no));
      }
    } else if (tokens[0] == "property") {
      if (in_vertex) {
        if (tokens.size() < 3 || tokens[1] == "list") {
          fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": unsupported vertex property");
        }
        props.emplace_back(tokens.back());
      }
    } else if (tokens[0] == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done || !seen_vertex) fail(ErrorKind::Parse, "ply header incomplete");

  auto index_of = [&](std::string_view name) -> int {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  const int inx = index_of("nx"), iny = index_of("ny"), inz = index_of("nz");
  if (ix < 0 || iy < 0 || iz < 0) fail(ErrorKind::Parse, "ply vertex lacks x/y/z properties");
  const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;

  std::vector<Eigen::Vector3d> pts;
  std::vector<Eigen::Vector3d> nrm;
  while (pts.size() < vertex_count) {
    if (!next()) fail(ErrorKind::Parse, "ply body truncated after " + std::to_string(pts.size()) + " vertices");
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != props.size()) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(props.size()) + " values");
    }
    auto at = [&](int i) { return parse_number(tokens[static_cast<std::size_t>(i)], line_no); };
    pts.emplace_back(at(ix), at(iy), at(iz));
    if (with_normals) nrm.emplace_back(at(inx), at(iny), at(inz));
  }
  return assemble(pts, nrm);
}

}  // namespace

CloudFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".ply" ? CloudFormat::PlyAscii : CloudFormat::XyzAscii;
}

PointCloud read_cloud(std::istream& in, CloudFormat format) {
  return format == CloudFormat::PlyAscii ? read_ply(in) : read_xyz(in);
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  try {
    return read_cloud(in, format);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

PointCloud load_cloud(const std::filesystem::path& path) { return load_cloud(path, format_from_path(path)); }

void write_xyz(std::ostream& out, const PointCloud& cloud) {
  char buf[128];
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.points.col(i);
    int len = std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g", p.x(), p.y(), p.z());
    out.write(buf, len);
    if (cloud.normals) {
      const auto n = cloud.normals->col(i);
      len = std::snprintf(buf, sizeof buf, " %.9g %.9g %.9g", n.x(), n.y(), n.z());
      out.write(buf, len);
    }
    out.put('\n');
  }
}

void save_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  write_xyz(out, cloud);
}

}  // namespace viewgrasp
