#include "mxhoi/pseudo_label.hpp"

#include <stdexcept>

#include "mxhoi/batching.hpp"

namespace mxhoi {

namespace {

struct ScoredPairs {
  std::vector<HumanObjectPair> pairs;
  ScoreMatrixd scores;
};

ScoredPairs score_image(const ModelParamsd& params, const SynthImage& image, const FeatureSpace& features,
                        int top_k) {
  ScoredPairs s;
  s.pairs = build_pairs(image, features, top_k);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(s.pairs.size()), features.dim());
  for (std::size_t i = 0; i < s.pairs.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = s.pairs[i].features.transpose();
  s.scores = forward(params, x);
  return s;
}

}  // namespace

std::vector<GtTriplet> select_labeled_pairs(std::span<const HumanObjectPair> pairs, const Eigen::MatrixXd& P,
                                            std::span<const int> labels) {
  if (P.rows() != static_cast<Eigen::Index>(pairs.size()) || pairs.empty())
    throw std::invalid_argument("select_labeled_pairs: P rows must match a nonempty pair list");
  std::vector<GtTriplet> out;
  for (int j : labels) {
    if (j < 0 || j >= P.cols()) throw std::out_of_range("select_labeled_pairs: label out of range");
    Eigen::Index best = 0;
    P.col(j).maxCoeff(&best);  // first maximum
    out.push_back({pairs[best].human.box, pairs[best].object.box, j});
  }
  return out;
}

std::vector<GtTriplet> select_confident_pairs(std::span<const HumanObjectPair> pairs, const Eigen::MatrixXd& P,
                                              double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("select_confident_pairs: threshold must lie in (0, 1)");
  if (P.rows() != static_cast<Eigen::Index>(pairs.size()))
    throw std::invalid_argument("select_confident_pairs: P rows must match the pair list");
  std::vector<GtTriplet> out;
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = 0; j < P.cols(); ++j)
      if (P(i, j) > threshold) out.push_back({pairs[i].human.box, pairs[i].object.box, static_cast<int>(j)});
  return out;
}

std::vector<GtTriplet> ws_to_pseudo_fs(const ModelParamsd& params, const SynthImage& image,
                                       const FeatureSpace& features, int top_k) {
  const ScoredPairs s = score_image(params, image, features, top_k);
  return select_labeled_pairs(s.pairs, s.scores.P, image.image_labels);
}

std::vector<GtTriplet> us_to_pseudo_fs(const ModelParamsd& params, const SynthImage& image,
                                       const FeatureSpace& features, double threshold, int top_k) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("us_to_pseudo_fs: threshold must lie in (0, 1)");
  const ScoredPairs s = score_image(params, image, features, top_k);
  return select_confident_pairs(s.pairs, s.scores.P, threshold);
}

CycleResult iterate_cycles(const World& tagged_world, const World& test_world,
                           const std::vector<int>& rare_class_ids, const ExperimentConfig& cfg,
                           PseudoMode mode, int n_cycles) {
  if (n_cycles < 1) throw std::invalid_argument("iterate_cycles: n_cycles must be >= 1");
  const SupervisionTag source = mode == PseudoMode::MultiStage ? SupervisionTag::WS : SupervisionTag::US;

  CycleResult result;
  std::map<int, std::vector<GtTriplet>> pseudo;  // empty before the first cycle
  for (int cycle = 1; cycle <= n_cycles; ++cycle) {
    World world = tagged_world;
    std::vector<SynthImage> images;
    CycleReport report;
    report.cycle = cycle;
    for (SynthImage& img : world.images) {
      if (img.supervision == source) {
        auto it = pseudo.find(img.image_id);
        if (it == pseudo.end() || it->second.empty()) continue;  // not trainable this cycle
        img.gt_triplets = it->second;
        // multi-stage turns WS images into plain FS data; US keeps its tag and
        // follows the FS path through pseudo targets
        if (mode == PseudoMode::MultiStage) img.supervision = SupervisionTag::FS;
        ++report.trained_pseudo_images;
        report.trained_pseudo_triplets += it->second.size();
      } else if (mode == PseudoMode::MultiStage && img.supervision == SupervisionTag::WS) {
        continue;
      } else if (img.supervision == SupervisionTag::US) {
        continue;
      }
      images.push_back(std::move(img));
    }
    world.images = std::move(images);

    ExperimentConfig c = cfg;
    c.run_id = cfg.run_id + "-cycle" + std::to_string(cycle);
    TrainResult trained = train(world, c, &test_world, rare_class_ids);
    report.report = evaluate(trained.params, test_world, rare_class_ids, cfg.top_k);
    result.log.insert(result.log.end(), trained.log.begin(), trained.log.end());
    result.log.push_back("cycle " + std::to_string(cycle) + " pseudo_images=" +
                         std::to_string(report.trained_pseudo_images) +
                         " map_full=" + std::to_string(report.report.map_full));
    result.cycles.push_back(std::move(report));
    result.params = std::move(trained.params);

    std::map<int, std::vector<GtTriplet>> next;
    for (const SynthImage& img : tagged_world.images) {
      if (img.supervision != source) continue;
      std::vector<GtTriplet> labels =
          mode == PseudoMode::MultiStage
              ? ws_to_pseudo_fs(result.params, img, tagged_world.features, cfg.top_k)
              : us_to_pseudo_fs(result.params, img, tagged_world.features, cfg.pseudo_threshold, cfg.top_k);
      if (!labels.empty()) next[img.image_id] = std::move(labels);
    }
    const bool fixed_point = next == pseudo;
    pseudo = std::move(next);
    if (fixed_point) {
      result.converged_early = true;
      break;
    }
  }
  result.pseudo_labels = std::move(pseudo);
  return result;
}

}  // namespace mxhoi
