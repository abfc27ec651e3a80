#include "mxhoi/supervision.hpp"

#include <stdexcept>
#include <string>

namespace mxhoi {

std::string_view to_string(SupervisionTag tag) {
  switch (tag) {
    case SupervisionTag::FS: return "FS";
    case SupervisionTag::WS: return "WS";
    case SupervisionTag::US: return "US";
  }
  throw std::invalid_argument("invalid SupervisionTag");
}

SupervisionTag parse_supervision(std::string_view name) {
  if (name == "FS") return SupervisionTag::FS;
  if (name == "WS") return SupervisionTag::WS;
  if (name == "US") return SupervisionTag::US;
  throw std::invalid_argument("unknown supervision tag '" + std::string(name) + "'");
}

Route route(SupervisionTag tag, bool has_pseudo_targets, double alpha_ws, double alpha_fs) {
  switch (tag) {
    case SupervisionTag::FS:
      return {LossKind::RegionLevel, MomentumBuffer::FullySupervised, alpha_fs};
    case SupervisionTag::WS:
      return {LossKind::ImageLevel, MomentumBuffer::WeaklySupervised, alpha_ws};
    case SupervisionTag::US:
      if (!has_pseudo_targets) {
        throw std::invalid_argument("US data cannot be routed before pseudo-labeling");
      }
      return {LossKind::RegionLevel, MomentumBuffer::FullySupervised, alpha_fs};
  }
  throw std::invalid_argument("invalid SupervisionTag");
}

}  // namespace mxhoi
