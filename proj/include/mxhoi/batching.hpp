#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mxhoi/synth_world.hpp"

namespace mxhoi {

struct HumanObjectPair {
  Detection human;
  Detection object;
  int human_image = 0;
  int object_image = 0;
  // position of each detection in its image's filtered detection list
  int human_index = 0;
  int object_index = 0;
  Eigen::VectorXd features;
  bool swapped = false;

  BoxPair boxes() const { return {human.box, object.box}; }
};

/// Per-class top-k filter by confidence, then the full human x object cross
/// product within the image. Throws if either side is empty after filtering.
std::vector<HumanObjectPair> build_pairs(const SynthImage& image, const FeatureSpace& features,
                                         int top_k);

using PairScorer = std::function<double(const Detection& human, const Detection& object)>;

double confidence_product(const Detection& human, const Detection& object);

// HOI element swapping. Pools every human of both images with every object of
// both images, then prunes the lowest-scoring candidates until the original
// count H1*O1 + H2*O2 remains. Among equal scores swapped candidates are
// pruned before same-image ones; remaining ties go by (image, index).
std::vector<HumanObjectPair> element_swap(const std::vector<HumanObjectPair>& pairs1,
                                          const std::vector<HumanObjectPair>& pairs2,
                                          const FeatureSpace& features,
                                          const PairScorer& scorer = confidence_product);

/// Region-level targets: Y(i, j) = 1 iff some gt triplet of class j has
/// pair_iou >= iou_threshold with pair i.
Eigen::MatrixXd make_fs_targets(std::span<const HumanObjectPair> pairs,
                                std::span<const GtTriplet> gt_triplets, int n_classes,
                                double iou_threshold = 0.5);

/// Image-level targets over the union of both images' label sets.
Eigen::VectorXd make_ws_targets(std::span<const int> first_labels,
                                std::span<const int> second_labels, int n_classes);

struct ScheduledBatch {
  int first_image = 0;
  int second_image = 0;
  SupervisionTag supervision = SupervisionTag::FS;
  bool element_swap = false;
  int epoch = 0;

  bool operator==(const ScheduledBatch&) const = default;
};

struct Schedule {
  std::vector<ScheduledBatch> batches;
  int batches_per_epoch = 0;
  int epochs = 0;
  // images that could not be paired in an epoch, per supervision type
  std::map<SupervisionTag, int> leftover_per_epoch;
  // supervision types present with a single image (no batch possible)
  std::vector<SupervisionTag> unbatchable;
};

// Two-image batches fixed before training. Each epoch shuffles every
// supervision set, pairs consecutive images, and interleaves the resulting
// homogeneous batches at random. Epochs are appended until at least
// `min_batches` batches exist (one epoch minimum).
Schedule batch_schedule(const World& world, std::uint64_t seed, long min_batches = 0);

struct MiniBatch {
  std::vector<HumanObjectPair> pairs;
  SupervisionTag supervision = SupervisionTag::FS;
  std::optional<Eigen::MatrixXd> fs_targets;
  std::optional<Eigen::VectorXd> ws_targets;
  std::array<int, 2> image_ids{0, 0};

  Eigen::MatrixXd feature_matrix() const;
  /// Throws std::invalid_argument when targets do not match the supervision tag.
  void validate() const;
};

}  // namespace mxhoi
