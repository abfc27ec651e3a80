#pragma once

#include <map>
#include <span>
#include <vector>

#include "mxhoi/batching.hpp"
#include "mxhoi/evaluation.hpp"
#include "mxhoi/experiment.hpp"
#include "mxhoi/synth_world.hpp"

namespace mxhoi {

/// One triplet per label: the pair with the largest P(i, j), first one on ties.
std::vector<GtTriplet> select_labeled_pairs(std::span<const HumanObjectPair> pairs, const Eigen::MatrixXd& P,
                                            std::span<const int> labels);

std::vector<GtTriplet> select_confident_pairs(std::span<const HumanObjectPair> pairs, const Eigen::MatrixXd& P,
                                              double threshold);

/// For every image-level label j, the image's own pair with the largest P(i, j)
/// becomes a pseudo triplet (first pair wins ties).
std::vector<GtTriplet> ws_to_pseudo_fs(const ModelParamsd& params, const SynthImage& image,
                                       const FeatureSpace& features, int top_k = 30);

/// Every (pair, class) with P(i, j) > threshold becomes a pseudo triplet.
/// threshold must lie in (0, 1).
std::vector<GtTriplet> us_to_pseudo_fs(const ModelParamsd& params, const SynthImage& image,
                                       const FeatureSpace& features, double threshold = 0.5,
                                       int top_k = 30);

enum class PseudoMode {
  // FS-only training, then WS images relabeled via ws_to_pseudo_fs and
  // trained as FS data in the next cycle.
  MultiStage,
  // Mixed WS + FS training, then US images relabeled via us_to_pseudo_fs and
  // trained as region-level data in the next cycle.
  Unlabeled,
};

struct CycleReport {
  int cycle = 0;
  EvalReport report;
  std::size_t trained_pseudo_images = 0;    // pseudo-labeled images used for this cycle's training
  std::size_t trained_pseudo_triplets = 0;
};

struct CycleResult {
  ModelParamsd params;
  std::vector<CycleReport> cycles;
  bool converged_early = false;  // pseudo labels reached a fixed point
  std::map<int, std::vector<GtTriplet>> pseudo_labels;  // last generated set, by image id
  std::vector<std::string> log;
};

// Each cycle retrains from the initial parameters on the tagged world plus
// the pseudo labels produced by the previous cycle, evaluates, and relabels.
// Stops early when a relabeling reproduces the previous pseudo-label set.
CycleResult iterate_cycles(const World& tagged_world, const World& test_world,
                           const std::vector<int>& rare_class_ids, const ExperimentConfig& cfg,
                           PseudoMode mode, int n_cycles);

}  // namespace mxhoi
