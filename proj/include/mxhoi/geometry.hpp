#pragma once

namespace mxhoi {

/// Axis-aligned rectangle on the (resolution-free) synthetic canvas.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  /// Strictly positive area with finite coordinates.
  bool valid() const;

  bool operator==(const Box&) const = default;
};

/// Throws std::invalid_argument if `box` is degenerate.
void require_valid(const Box& box);

/// Intersection over union. Throws std::invalid_argument on a degenerate box.
double iou(const Box& a, const Box& b);

struct BoxPair {
  Box human;
  Box object;
};

/// min(iou(human), iou(object)): a pair clears a threshold iff both boxes do.
double pair_iou(const BoxPair& predicted, const BoxPair& ground_truth);

}  // namespace mxhoi
