#include "mxhoi/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "mxhoi/batching.hpp"

namespace mxhoi {

std::optional<double> match_and_ap(std::span<const HOIPrediction> predictions,
                                   std::span<const GtInstance> gt, double iou_threshold) {
  if (gt.empty()) return std::nullopt;

  std::map<int, std::vector<std::size_t>> gt_by_image;
  for (std::size_t g = 0; g < gt.size(); ++g) gt_by_image[gt[g].image_id].push_back(g);
  std::vector<bool> matched(gt.size(), false);

  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].score > predictions[b].score;
  });

  std::vector<double> precision;
  std::vector<double> recall;
  precision.reserve(order.size());
  recall.reserve(order.size());
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const HOIPrediction& pred = predictions[order[rank]];
    auto it = gt_by_image.find(pred.image_id);
    if (it != gt_by_image.end()) {
      double best = -1.0;
      std::size_t best_g = 0;
      for (std::size_t g : it->second) {
        if (matched[g]) continue;
        const double o = pair_iou({pred.human_box, pred.object_box}, {gt[g].human_box, gt[g].object_box});
        if (o > best) {
          best = o;
          best_g = g;
        }
      }
      if (best >= iou_threshold) {
        matched[best_g] = true;
        ++tp;
      }
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gt.size()));
  }

  // precision envelope, then area under the step curve
  for (std::size_t k = precision.size(); k-- > 1;)
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return std::clamp(ap, 0.0, 1.0);
}

double subset_map(const EvalReport& report, const std::vector<int>& classes) {
  double sum = 0.0;
  int n = 0;
  for (int c : classes) {
    if (c >= 0 && c < static_cast<int>(report.ap_per_class.size()) && report.ap_per_class[c]) {
      sum += *report.ap_per_class[c];
      ++n;
    }
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

EvalReport evaluate_predictions(std::span<const HOIPrediction> predictions,
                                const std::vector<SynthImage>& test_images, int n_classes,
                                const std::vector<int>& rare_class_ids, double iou_threshold) {
  if (test_images.empty()) throw std::invalid_argument("evaluate: empty test set");
  std::vector<std::vector<GtInstance>> gt(n_classes);
  for (const SynthImage& img : test_images) {
    for (const GtTriplet& t : img.gt_triplets) {
      if (t.hoi_class < 0 || t.hoi_class >= n_classes)
        throw std::out_of_range("evaluate: gt class out of range");
      gt[t.hoi_class].push_back({img.image_id, t.human, t.object});
    }
  }
  std::vector<std::vector<HOIPrediction>> by_class(n_classes);
  for (const HOIPrediction& p : predictions) {
    if (p.hoi_class < 0 || p.hoi_class >= n_classes)
      throw std::out_of_range("evaluate: predicted class out of range");
    by_class[p.hoi_class].push_back(p);
  }

  EvalReport report;
  report.rare_class_ids = rare_class_ids;
  report.ap_per_class.resize(n_classes);
  for (int c = 0; c < n_classes; ++c)
    report.ap_per_class[c] = match_and_ap(by_class[c], gt[c], iou_threshold);

  std::set<int> rare(rare_class_ids.begin(), rare_class_ids.end());
  std::vector<int> all(n_classes);
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> rare_list;
  std::vector<int> nonrare_list;
  for (int c : all) (rare.count(c) ? rare_list : nonrare_list).push_back(c);
  report.map_full = subset_map(report, all);
  report.map_rare = subset_map(report, rare_list);
  report.map_nonrare = subset_map(report, nonrare_list);
  return report;
}

std::vector<HOIPrediction> collect_predictions(const ModelParamsd& params, const World& test_world,
                                               int top_k) {
  std::vector<HOIPrediction> out;
  for (const SynthImage& img : test_world.images) {
    const std::vector<HumanObjectPair> pairs = build_pairs(img, test_world.features, top_k);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(pairs.size()), test_world.features.dim());
    for (std::size_t i = 0; i < pairs.size(); ++i)
      x.row(static_cast<Eigen::Index>(i)) = pairs[i].features.transpose();
    const ScoreMatrixd scores = forward(params, x);
    for (Eigen::Index i = 0; i < scores.P.rows(); ++i) {
      for (Eigen::Index j = 0; j < scores.P.cols(); ++j) {
        out.push_back({img.image_id, pairs[i].human.box, pairs[i].object.box, static_cast<int>(j),
                       scores.P(i, j)});
      }
    }
  }
  return out;
}

EvalReport evaluate(const ModelParamsd& params, const World& test_world,
                    const std::vector<int>& rare_class_ids, int top_k) {
  if (test_world.images.empty()) throw std::invalid_argument("evaluate: empty test set");
  const std::vector<HOIPrediction> preds = collect_predictions(params, test_world, top_k);
  return evaluate_predictions(preds, test_world.images, params.n_classes(), rare_class_ids);
}

}  // namespace mxhoi
