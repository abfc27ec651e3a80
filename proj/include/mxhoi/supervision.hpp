#pragma once

#include <string_view>

namespace mxhoi {

/// Kind of annotation an image (or a mini-batch built from two images) carries.
///   FS: region-level triplets, WS: image-level HOI labels, US: nothing.
enum class SupervisionTag { FS, WS, US };

std::string_view to_string(SupervisionTag tag);
/// Inverse of to_string; throws std::invalid_argument on anything but "FS", "WS", "US".
SupervisionTag parse_supervision(std::string_view name);

enum class LossKind { RegionLevel, ImageLevel };
enum class MomentumBuffer { FullySupervised, WeaklySupervised };

struct Route {
  LossKind loss;
  MomentumBuffer buffer;
  double step_size;
};

// US data only becomes trainable once it carries pseudo region targets, and
// then follows the FS path.
Route route(SupervisionTag tag, bool has_pseudo_targets, double alpha_ws, double alpha_fs);

}  // namespace mxhoi
