#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mxhoi/model.hpp"
#include "mxhoi/synth_world.hpp"

namespace mxhoi {

struct HOIPrediction {
  int image_id = 0;
  Box human_box;
  Box object_box;
  int hoi_class = 0;
  double score = 0.0;
};

/// A ground-truth triplet tagged with the image it belongs to.
struct GtInstance {
  int image_id = 0;
  Box human_box;
  Box object_box;
};

struct EvalReport {
  std::vector<std::optional<double>> ap_per_class;  // nullopt: class absent from test gt
  double map_full = 0.0;
  double map_rare = 0.0;     // NaN when no rare class has test gt
  double map_nonrare = 0.0;  // NaN when no non-rare class has test gt
  std::vector<int> rare_class_ids;
};

// Average precision of one class. Predictions are ranked by descending score
// (ties keep input order); each one is a true positive iff its pair_iou with
// the best still-unmatched gt of the same image reaches `iou_threshold`.
// All-point interpolated AP over the precision envelope. nullopt when `gt` is empty.
std::optional<double> match_and_ap(std::span<const HOIPrediction> predictions,
                                   std::span<const GtInstance> gt, double iou_threshold = 0.5);

/// Per-class AP plus full / rare / non-rare means over classes with test gt.
EvalReport evaluate_predictions(std::span<const HOIPrediction> predictions,
                                const std::vector<SynthImage>& test_images, int n_classes,
                                const std::vector<int>& rare_class_ids, double iou_threshold = 0.5);

/// build_pairs + forward + every (pair, class) entry of P as a prediction, per image.
std::vector<HOIPrediction> collect_predictions(const ModelParamsd& params, const World& test_world,
                                               int top_k = 30);

EvalReport evaluate(const ModelParamsd& params, const World& test_world,
                    const std::vector<int>& rare_class_ids, int top_k = 30);

/// Mean of the defined APs among `classes`; NaN if none is defined.
double subset_map(const EvalReport& report, const std::vector<int>& classes);

}  // namespace mxhoi
