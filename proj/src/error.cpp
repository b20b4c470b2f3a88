#include "viewgrasp/error.hpp"

namespace viewgrasp {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Format: return "format";
    case ErrorKind::EmptyCloud: return "empty-cloud";
    case ErrorKind::DegenerateGeometry: return "degenerate-geometry";
    case ErrorKind::EmptyView: return "empty-view";
    case ErrorKind::EmptyFeature: return "empty-feature";
    case ErrorKind::UnknownCategory: return "unknown-category";
    case ErrorKind::NoKnowledge: return "no-knowledge";
    case ErrorKind::EmptyMap: return "empty-map";
    case ErrorKind::EmptyNeighborhood: return "empty-neighborhood";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace viewgrasp
