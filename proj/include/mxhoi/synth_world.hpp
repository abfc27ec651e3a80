#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mxhoi/geometry.hpp"
#include "mxhoi/supervision.hpp"

namespace mxhoi {

struct IntRange {
  int lo = 1;
  int hi = 1;
};

// Generator parameters. The class structure (HOI table, verb layouts, rare
// set, appearance prototypes) depends only on `seed`; `stream` selects an
// independent image sample over that same structure, so a held-out test set
// is the same config with stream != 0.
struct WorldConfig {
  int n_object_classes = 8;
  int n_verb_classes = 6;
  int n_hoi_classes = 24;
  int n_images = 800;
  IntRange humans_per_image{1, 2};
  IntRange objects_per_image{1, 3};
  int feature_dim = 32;
  double feature_noise_sigma = 0.5;
  double detection_jitter_sigma = 0.05;
  double rare_class_fraction = 0.25;
  double distractor_ratio = 2.0;
  double layout_noise_sigma = 0.15;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;

  /// Throws InfeasibleConfig naming the first offending field.
  void validate() const;
};

class InfeasibleConfig : public std::invalid_argument {
 public:
  InfeasibleConfig(std::string field, const std::string& what)
      : std::invalid_argument("infeasible world config [" + field + "]: " + what),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

inline constexpr int kHumanClassId = -1;

struct Detection {
  Box box;
  int class_id = kHumanClassId;
  double confidence = 1.0;

  bool is_human() const { return class_id == kHumanClassId; }
  bool operator==(const Detection&) const = default;
};

struct GtTriplet {
  Box human;
  Box object;
  int hoi_class = 0;

  bool operator==(const GtTriplet&) const = default;
};

struct SynthImage {
  int image_id = 0;
  std::vector<Detection> human_detections;
  std::vector<Detection> object_detections;
  std::vector<GtTriplet> gt_triplets;
  std::vector<int> image_labels;  // sorted, unique
  SupervisionTag supervision = SupervisionTag::FS;

  bool operator==(const SynthImage&) const = default;
};

struct HoiClass {
  int verb = 0;
  int object_class = 0;
};

/// Canonical placement of the object relative to the human for one verb:
/// center offset in units of the human box size, and log size ratios.
struct VerbLayout {
  double dx = 0.0;
  double dy = 0.0;
  double log_w = 0.0;
  double log_h = 0.0;
};

// Maps detections to feature vectors laid out as
//   [object appearance | human appearance | spatial layout (5)].
// Appearance is a class prototype plus Gaussian noise whose draw is keyed on
// (seed, image id, class, box), so the same detection always yields the same
// vector and swapped pairs reuse each detection's own appearance.
class FeatureSpace {
 public:
  static constexpr int kLayoutDims = 5;

  FeatureSpace() = default;
  explicit FeatureSpace(const WorldConfig& cfg);

  int dim() const { return dim_; }
  int object_dims() const { return object_dims_; }
  int human_dims() const { return human_dims_; }
  double noise_sigma() const { return sigma_; }

  /// Appearance block of a detection (object or human block depending on class).
  Eigen::VectorXd appearance(const Detection& det, int image_id) const;
  /// Noise-free appearance block.
  Eigen::VectorXd prototype(int class_id) const;
  /// (dx, dy, log w ratio, log h ratio, iou) of the object box relative to the human box.
  static Eigen::VectorXd layout(const Box& human, const Box& object);

  Eigen::VectorXd pair_features(const Detection& human, int human_image, const Detection& object,
                                int object_image) const;

 private:
  int dim_ = 0;
  int object_dims_ = 0;
  int human_dims_ = 0;
  double sigma_ = 0.0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd object_prototypes_;  // n_object_classes x object_dims
  Eigen::VectorXd human_prototype_;
};

struct World {
  WorldConfig config;
  std::vector<HoiClass> hoi_classes;
  std::vector<VerbLayout> verb_layouts;
  std::vector<SynthImage> images;
  FeatureSpace features;

  int n_hoi_classes() const { return static_cast<int>(hoi_classes.size()); }
  /// Position of `image_id` in `images`; throws std::out_of_range.
  std::size_t index_of(int image_id) const;
};

World generate_world(const WorldConfig& cfg);

/// Rebuilds the class structure and feature space for `cfg` around existing images.
World assemble_world(const WorldConfig& cfg, std::vector<SynthImage> images);

/// Features of a within-image pair. Throws if the vector does not match cfg.feature_dim.
Eigen::VectorXd extract_features(const World& world, const SynthImage& image,
                                 const Detection& human, const Detection& object);

/// Number of images each HOI class appears in.
std::vector<int> class_image_counts(const std::vector<SynthImage>& images, int n_classes);

/// Classes with fewer than `min_images` annotated images.
std::vector<int> rare_classes(const World& world, int min_images = 10);

/// Random image-level assignment of supervision tags. WS images keep only
/// their label set, US images keep nothing, FS images keep everything.
World split_supervision(const World& world, double ws_fraction, double fs_fraction,
                        double us_fraction, std::uint64_t seed);

/// Strip annotations that `tag` does not carry.
void apply_supervision(SynthImage& image, SupervisionTag tag);

}  // namespace mxhoi
