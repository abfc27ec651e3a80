#include "mxhoi/synth_world.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

namespace mxhoi {

namespace {

constexpr double kCanvasWidth = 640.0;
constexpr double kCanvasHeight = 480.0;

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 finalizer over an xor-accumulated state
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

std::uint64_t structure_seed(std::uint64_t seed, std::uint64_t salt) { return mix(mix(0, seed), salt); }

struct ClassStructure {
  std::vector<HoiClass> hoi_classes;
  std::vector<VerbLayout> verb_layouts;
  std::vector<int> rare;           // class ids with a below-threshold image quota
  std::vector<double> weights;     // sampling weights, zero for rare classes
};

ClassStructure make_structure(const WorldConfig& cfg) {
  std::mt19937_64 rng(structure_seed(cfg.seed, 1));
  ClassStructure s;

  // HOI table: one verb per object class first so every object class is
  // interactable, then the remaining combinations in random order.
  std::vector<HoiClass> all;
  for (int o = 0; o < cfg.n_object_classes; ++o)
    for (int v = 0; v < cfg.n_verb_classes; ++v) all.push_back({v, o});
  std::shuffle(all.begin(), all.end(), rng);
  std::vector<bool> covered(cfg.n_object_classes, false);
  std::vector<bool> taken(all.size(), false);
  for (std::size_t k = 0; k < all.size() && static_cast<int>(s.hoi_classes.size()) < cfg.n_hoi_classes; ++k) {
    if (!covered[all[k].object_class]) {
      covered[all[k].object_class] = true;
      taken[k] = true;
      s.hoi_classes.push_back(all[k]);
    }
  }
  for (std::size_t k = 0; k < all.size() && static_cast<int>(s.hoi_classes.size()) < cfg.n_hoi_classes; ++k) {
    if (!taken[k]) s.hoi_classes.push_back(all[k]);
  }
  std::sort(s.hoi_classes.begin(), s.hoi_classes.end(), [](const HoiClass& a, const HoiClass& b) {
    return std::tie(a.object_class, a.verb) < std::tie(b.object_class, b.verb);
  });

  // Verb layouts spread around the human so different verbs on the same
  // object are separable by geometry alone.
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int v = 0; v < cfg.n_verb_classes; ++v) {
    const double angle = 2.0 * std::numbers::pi * (v + 0.25 * u01(rng)) / cfg.n_verb_classes;
    const double dist = 0.5 + 0.5 * u01(rng);
    s.verb_layouts.push_back({dist * std::cos(angle), dist * std::sin(angle),
                              -0.7 + 0.9 * u01(rng), -1.2 + 0.9 * u01(rng)});
  }

  const int n_classes = cfg.n_hoi_classes;
  const int n_rare = static_cast<int>(std::lround(cfg.rare_class_fraction * n_classes));
  std::vector<int> order(n_classes);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  s.rare.assign(order.begin(), order.begin() + n_rare);
  std::sort(s.rare.begin(), s.rare.end());

  // Zipf-like weights over the frequent classes, in random rank order.
  s.weights.assign(n_classes, 0.0);
  for (int rank = n_rare; rank < n_classes; ++rank) {
    s.weights[order[rank]] = 1.0 / static_cast<double>(rank - n_rare + 1);
  }
  return s;
}

Box jitter_box(const Box& b, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return b;
  std::normal_distribution<double> n01(0.0, 1.0);
  const double w = b.width();
  const double h = b.height();
  Box out{b.x_min + sigma * w * n01(rng), b.y_min + sigma * h * n01(rng),
          b.x_max + sigma * w * n01(rng), b.y_max + sigma * h * n01(rng)};
  // keep a strictly positive extent
  if (out.x_max - out.x_min < 0.25 * w) out.x_max = out.x_min + 0.25 * w;
  if (out.y_max - out.y_min < 0.25 * h) out.y_max = out.y_min + 0.25 * h;
  return out;
}

Box centered_box(double cx, double cy, double w, double h) {
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

int rare_quota(int rank, int n_rare) {
  // 9 images down to 1 across the rare classes
  if (n_rare <= 1) return 5;
  return 9 - (8 * rank) / (n_rare - 1);
}

}  // namespace

void WorldConfig::validate() const {
  if (n_object_classes < 1) throw InfeasibleConfig("n_object_classes", "must be >= 1");
  if (n_verb_classes < 1) throw InfeasibleConfig("n_verb_classes", "must be >= 1");
  if (n_hoi_classes < 1) throw InfeasibleConfig("n_hoi_classes", "must be >= 1");
  if (n_hoi_classes > n_object_classes * n_verb_classes)
    throw InfeasibleConfig("n_hoi_classes", "exceeds n_object_classes * n_verb_classes");
  if (n_images < 1) throw InfeasibleConfig("n_images", "must be >= 1");
  if (humans_per_image.lo < 1 || humans_per_image.hi < humans_per_image.lo)
    throw InfeasibleConfig("humans_per_image", "range must be nonempty and start at >= 1");
  if (objects_per_image.lo < 1 || objects_per_image.hi < objects_per_image.lo)
    throw InfeasibleConfig("objects_per_image", "range must be nonempty and start at >= 1");
  // two appearance blocks of at least one coordinate each plus the layout block
  if (feature_dim < FeatureSpace::kLayoutDims + 2)
    throw InfeasibleConfig("feature_dim", "must be >= " + std::to_string(FeatureSpace::kLayoutDims + 2));
  if (!(feature_noise_sigma >= 0.0)) throw InfeasibleConfig("feature_noise_sigma", "must be >= 0");
  if (!(detection_jitter_sigma >= 0.0)) throw InfeasibleConfig("detection_jitter_sigma", "must be >= 0");
  if (!(layout_noise_sigma >= 0.0)) throw InfeasibleConfig("layout_noise_sigma", "must be >= 0");
  if (!(distractor_ratio >= 0.0)) throw InfeasibleConfig("distractor_ratio", "must be >= 0");
  if (!(rare_class_fraction >= 0.0 && rare_class_fraction <= 1.0))
    throw InfeasibleConfig("rare_class_fraction", "must lie in [0, 1]");
}

// --- FeatureSpace ----------------------------------------------------------

FeatureSpace::FeatureSpace(const WorldConfig& cfg)
    : dim_(cfg.feature_dim), sigma_(cfg.feature_noise_sigma), seed_(cfg.seed) {
  const int appearance = dim_ - kLayoutDims;
  object_dims_ = std::max(1, (3 * appearance) / 4);
  human_dims_ = appearance - object_dims_;
  std::mt19937_64 rng(structure_seed(cfg.seed, 2));
  std::normal_distribution<double> n01(0.0, 1.0);
  object_prototypes_.resize(cfg.n_object_classes, object_dims_);
  for (Eigen::Index r = 0; r < object_prototypes_.rows(); ++r)
    for (Eigen::Index c = 0; c < object_prototypes_.cols(); ++c) object_prototypes_(r, c) = n01(rng);
  human_prototype_.resize(human_dims_);
  for (Eigen::Index c = 0; c < human_prototype_.size(); ++c) human_prototype_(c) = n01(rng);
}

Eigen::VectorXd FeatureSpace::prototype(int class_id) const {
  if (class_id == kHumanClassId) return human_prototype_;
  if (class_id < 0 || class_id >= object_prototypes_.rows())
    throw std::invalid_argument("object class out of range: " + std::to_string(class_id));
  return object_prototypes_.row(class_id).transpose();
}

Eigen::VectorXd FeatureSpace::appearance(const Detection& det, int image_id) const {
  Eigen::VectorXd v = prototype(det.class_id);
  if (sigma_ > 0.0) {
    std::uint64_t key = mix(mix(seed_, static_cast<std::uint64_t>(image_id)),
                            static_cast<std::uint64_t>(static_cast<std::int64_t>(det.class_id)));
    for (double coord : {det.box.x_min, det.box.y_min, det.box.x_max, det.box.y_max})
      key = mix(key, std::bit_cast<std::uint64_t>(coord));
    std::mt19937_64 rng(key);
    std::normal_distribution<double> noise(0.0, sigma_);
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += noise(rng);
  }
  return v;
}

Eigen::VectorXd FeatureSpace::layout(const Box& human, const Box& object) {
  Eigen::VectorXd v(kLayoutDims);
  v << (object.center_x() - human.center_x()) / human.width(),
      (object.center_y() - human.center_y()) / human.height(),
      std::log(object.width() / human.width()), std::log(object.height() / human.height()),
      iou(human, object);
  return v;
}

Eigen::VectorXd FeatureSpace::pair_features(const Detection& human, int human_image,
                                            const Detection& object, int object_image) const {
  if (!human.is_human()) throw std::invalid_argument("pair_features: first detection is not a human");
  if (object.is_human()) throw std::invalid_argument("pair_features: second detection is a human");
  Eigen::VectorXd f(dim_);
  f << appearance(object, object_image), appearance(human, human_image),
      layout(human.box, object.box);
  return f;
}

// --- World -----------------------------------------------------------------

std::size_t World::index_of(int image_id) const {
  // training streams use positional ids; fall back to a scan otherwise
  if (image_id >= 0 && static_cast<std::size_t>(image_id) < images.size() &&
      images[image_id].image_id == image_id)
    return static_cast<std::size_t>(image_id);
  for (std::size_t k = 0; k < images.size(); ++k)
    if (images[k].image_id == image_id) return k;
  throw std::out_of_range("image id " + std::to_string(image_id) + " not in world");
}

World assemble_world(const WorldConfig& cfg, std::vector<SynthImage> images) {
  cfg.validate();
  ClassStructure s = make_structure(cfg);
  World world;
  world.config = cfg;
  world.hoi_classes = std::move(s.hoi_classes);
  world.verb_layouts = std::move(s.verb_layouts);
  world.images = std::move(images);
  world.features = FeatureSpace(cfg);
  return world;
}

World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  const ClassStructure s = make_structure(cfg);
  std::mt19937_64 rng(mix(structure_seed(cfg.seed, 3), cfg.stream));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto uniform_int = [&rng](IntRange r) {
    return std::uniform_int_distribution<int>(r.lo, r.hi)(rng);
  };

  const int n_classes = cfg.n_hoi_classes;
  const int id_base = static_cast<int>(cfg.stream) * 1'000'000;

  // Humans and object slots (one interaction per object).
  struct Slot {
    int image;
    int object;
  };
  std::vector<std::vector<Box>> humans(cfg.n_images);
  std::vector<int> n_objects(cfg.n_images);
  std::vector<Slot> slots;
  for (int i = 0; i < cfg.n_images; ++i) {
    const int nh = uniform_int(cfg.humans_per_image);
    n_objects[i] = uniform_int(cfg.objects_per_image);
    for (int h = 0; h < nh; ++h) {
      const double w = 40.0 + 40.0 * u01(rng);
      const double hh = w * (1.8 + 0.6 * u01(rng));
      humans[i].push_back(centered_box(100.0 + (kCanvasWidth - 200.0) * u01(rng),
                                       100.0 + (kCanvasHeight - 200.0) * u01(rng), w, hh));
    }
    for (int o = 0; o < n_objects[i]; ++o) slots.push_back({i, o});
  }

  // Class assignment: quotas first (frequent classes in >= 10 distinct images,
  // rare classes in exactly their quota of distinct images), then the rest by weight.
  std::vector<int> slot_class(slots.size(), -1);
  std::vector<std::set<int>> classes_in_image(cfg.n_images);
  std::vector<std::size_t> order(slots.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::pair<int, int>> demand;  // (class, distinct images)
  std::vector<bool> is_rare(n_classes, false);
  for (int c : s.rare) is_rare[c] = true;
  for (int c = 0; c < n_classes; ++c)
    if (!is_rare[c]) demand.push_back({c, 10});
  for (std::size_t r = 0; r < s.rare.size(); ++r)
    demand.push_back({s.rare[r], rare_quota(static_cast<int>(r), static_cast<int>(s.rare.size()))});

  std::size_t cursor = 0;
  for (const auto& [cls, need] : demand) {
    int got = 0;
    for (std::size_t scanned = 0; scanned < order.size() && got < need; ++scanned) {
      const std::size_t k = order[(cursor + scanned) % order.size()];
      if (slot_class[k] >= 0 || classes_in_image[slots[k].image].count(cls)) continue;
      slot_class[k] = cls;
      classes_in_image[slots[k].image].insert(cls);
      ++got;
    }
    if (got < need) {
      throw InfeasibleConfig("n_images", "only " + std::to_string(slots.size()) +
                                             " interaction slots; cannot place class " +
                                             std::to_string(cls) + " in " + std::to_string(need) +
                                             " distinct images");
    }
    cursor = (cursor + static_cast<std::size_t>(need)) % order.size();
  }

  const bool have_frequent = std::any_of(s.weights.begin(), s.weights.end(), [](double w) { return w > 0; });
  std::discrete_distribution<int> frequent(s.weights.begin(), s.weights.end());
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (slot_class[k] >= 0) continue;
    if (!have_frequent)
      throw InfeasibleConfig("rare_class_fraction",
                             "every class is rare but images have more interactions than rare quotas");
    slot_class[k] = frequent(rng);
  }

  // Materialize images.
  std::vector<SynthImage> images(cfg.n_images);
  std::size_t slot_cursor = 0;
  for (int i = 0; i < cfg.n_images; ++i) {
    SynthImage& img = images[i];
    img.image_id = id_base + i;
    const int nh = static_cast<int>(humans[i].size());
    std::vector<Box> objects;
    std::vector<int> object_class;
    for (int o = 0; o < n_objects[i]; ++o, ++slot_cursor) {
      const int cls = slot_class[slot_cursor];
      const HoiClass& hc = s.hoi_classes[cls];
      const VerbLayout& lay = s.verb_layouts[hc.verb];
      const Box& hb = humans[i][o % nh];
      const double sd = cfg.layout_noise_sigma;
      const double cx = hb.center_x() + (lay.dx + sd * n01(rng)) * hb.width();
      const double cy = hb.center_y() + (lay.dy + sd * n01(rng)) * hb.height();
      const double w = hb.width() * std::exp(lay.log_w + sd * n01(rng));
      const double h = hb.height() * std::exp(lay.log_h + sd * n01(rng));
      const Box ob = centered_box(cx, cy, w, h);
      objects.push_back(ob);
      object_class.push_back(hc.object_class);
      img.gt_triplets.push_back({hb, ob, cls});
      img.image_labels.push_back(cls);
    }
    std::sort(img.image_labels.begin(), img.image_labels.end());
    img.image_labels.erase(std::unique(img.image_labels.begin(), img.image_labels.end()),
                           img.image_labels.end());

    for (const Box& hb : humans[i])
      img.human_detections.push_back(
          {jitter_box(hb, cfg.detection_jitter_sigma, rng), kHumanClassId, 0.5 + 0.5 * u01(rng)});
    for (std::size_t o = 0; o < objects.size(); ++o)
      img.object_detections.push_back({jitter_box(objects[o], cfg.detection_jitter_sigma, rng),
                                       object_class[o], 0.5 + 0.5 * u01(rng)});

    // Distractors: random placement, random class, lower confidence on average.
    const int n_distract =
        static_cast<int>(std::lround(cfg.distractor_ratio * static_cast<double>(nh + objects.size())));
    for (int d = 0; d < n_distract; ++d) {
      const double conf = 0.05 + 0.55 * u01(rng);
      const double cx = 40.0 + (kCanvasWidth - 80.0) * u01(rng);
      const double cy = 40.0 + (kCanvasHeight - 80.0) * u01(rng);
      if (u01(rng) < 1.0 / 3.0) {
        const double w = 40.0 + 40.0 * u01(rng);
        img.human_detections.push_back(
            {centered_box(cx, cy, w, w * (1.8 + 0.6 * u01(rng))), kHumanClassId, conf});
      } else {
        const int cls = std::uniform_int_distribution<int>(0, cfg.n_object_classes - 1)(rng);
        const double w = 15.0 + 50.0 * u01(rng);
        const double h = 15.0 + 50.0 * u01(rng);
        img.object_detections.push_back({centered_box(cx, cy, w, h), cls, conf});
      }
    }
    std::shuffle(img.human_detections.begin(), img.human_detections.end(), rng);
    std::shuffle(img.object_detections.begin(), img.object_detections.end(), rng);
  }

  return assemble_world(cfg, std::move(images));
}

Eigen::VectorXd extract_features(const World& world, const SynthImage& image,
                                 const Detection& human, const Detection& object) {
  Eigen::VectorXd f = world.features.pair_features(human, image.image_id, object, image.image_id);
  if (f.size() != world.config.feature_dim) {
    throw std::invalid_argument("feature dimension " + std::to_string(f.size()) +
                                " does not match feature_dim " +
                                std::to_string(world.config.feature_dim));
  }
  return f;
}

std::vector<int> class_image_counts(const std::vector<SynthImage>& images, int n_classes) {
  std::vector<int> counts(n_classes, 0);
  for (const SynthImage& img : images) {
    std::set<int> seen;
    for (const GtTriplet& t : img.gt_triplets) seen.insert(t.hoi_class);
    for (int c : img.image_labels) seen.insert(c);
    for (int c : seen)
      if (c >= 0 && c < n_classes) ++counts[c];
  }
  return counts;
}

std::vector<int> rare_classes(const World& world, int min_images) {
  const std::vector<int> counts = class_image_counts(world.images, world.n_hoi_classes());
  std::vector<int> rare;
  for (int c = 0; c < static_cast<int>(counts.size()); ++c)
    if (counts[c] < min_images) rare.push_back(c);
  return rare;
}

void apply_supervision(SynthImage& image, SupervisionTag tag) {
  image.supervision = tag;
  switch (tag) {
    case SupervisionTag::FS:
      break;
    case SupervisionTag::WS:
      image.gt_triplets.clear();
      break;
    case SupervisionTag::US:
      image.gt_triplets.clear();
      image.image_labels.clear();
      break;
  }
}

World split_supervision(const World& world, double ws_fraction, double fs_fraction,
                        double us_fraction, std::uint64_t seed) {
  if (ws_fraction < 0.0 || fs_fraction < 0.0 || us_fraction < 0.0)
    throw std::invalid_argument("supervision fractions must be nonnegative");
  if (std::abs(ws_fraction + fs_fraction + us_fraction - 1.0) > 1e-9)
    throw std::invalid_argument("supervision fractions must sum to 1");

  const std::size_t n = world.images.size();
  const auto n_ws = static_cast<std::size_t>(std::lround(ws_fraction * static_cast<double>(n)));
  const auto n_fs = std::min(n - std::min(n, n_ws),
                             static_cast<std::size_t>(std::lround(fs_fraction * static_cast<double>(n))));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix(seed, 0x5u));
  std::shuffle(order.begin(), order.end(), rng);

  World out = world;
  for (std::size_t k = 0; k < n; ++k) {
    SupervisionTag tag = SupervisionTag::US;
    if (k < std::min(n, n_ws)) {
      tag = SupervisionTag::WS;
    } else if (k < std::min(n, n_ws) + n_fs) {
      tag = SupervisionTag::FS;
    } else if (us_fraction == 0.0) {
      // rounding remainder when no unlabeled share was requested
      tag = fs_fraction >= ws_fraction ? SupervisionTag::FS : SupervisionTag::WS;
    }
    apply_supervision(out.images[order[k]], tag);
  }
  return out;
}

}  // namespace mxhoi
