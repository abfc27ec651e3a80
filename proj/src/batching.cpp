#include "mxhoi/batching.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <tuple>

namespace mxhoi {

namespace {

std::vector<int> top_k_per_class(const std::vector<Detection>& dets, int top_k) {
  std::map<int, std::vector<int>> by_class;
  for (int k = 0; k < static_cast<int>(dets.size()); ++k) by_class[dets[k].class_id].push_back(k);
  std::vector<int> keep;
  for (auto& [cls, idx] : by_class) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return dets[a].confidence > dets[b].confidence; });
    if (static_cast<int>(idx.size()) > top_k) idx.resize(top_k);
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

struct Element {
  Detection det;
  int image;
  int index;
};

// Distinct humans and objects underlying a within-image pair list, in first-seen order.
void collect_elements(const std::vector<HumanObjectPair>& pairs, std::vector<Element>& humans,
                      std::vector<Element>& objects) {
  std::set<int> seen_h;
  std::set<int> seen_o;
  for (const HumanObjectPair& p : pairs) {
    if (seen_h.insert(p.human_index).second) humans.push_back({p.human, p.human_image, p.human_index});
    if (seen_o.insert(p.object_index).second) objects.push_back({p.object, p.object_image, p.object_index});
  }
}

}  // namespace

std::vector<HumanObjectPair> build_pairs(const SynthImage& image, const FeatureSpace& features,
                                         int top_k) {
  if (top_k < 1) throw std::invalid_argument("build_pairs: top_k must be >= 1");
  const std::vector<int> hs = top_k_per_class(image.human_detections, top_k);
  const std::vector<int> os = top_k_per_class(image.object_detections, top_k);
  if (hs.empty() || os.empty()) {
    throw std::invalid_argument("build_pairs: image " + std::to_string(image.image_id) +
                                " has no human or no object detection");
  }
  std::vector<HumanObjectPair> pairs;
  pairs.reserve(hs.size() * os.size());
  for (int hi = 0; hi < static_cast<int>(hs.size()); ++hi) {
    for (int oi = 0; oi < static_cast<int>(os.size()); ++oi) {
      HumanObjectPair p;
      p.human = image.human_detections[hs[hi]];
      p.object = image.object_detections[os[oi]];
      p.human_image = p.object_image = image.image_id;
      p.human_index = hs[hi];
      p.object_index = os[oi];
      p.features = features.pair_features(p.human, image.image_id, p.object, image.image_id);
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

double confidence_product(const Detection& human, const Detection& object) {
  return human.confidence * object.confidence;
}

std::vector<HumanObjectPair> element_swap(const std::vector<HumanObjectPair>& pairs1,
                                          const std::vector<HumanObjectPair>& pairs2,
                                          const FeatureSpace& features, const PairScorer& scorer) {
  if (pairs1.empty() || pairs2.empty()) throw std::invalid_argument("element_swap: empty pair list");
  const int image1 = pairs1.front().human_image;
  const int image2 = pairs2.front().human_image;
  if (image1 == image2) throw std::invalid_argument("element_swap: both pair lists come from one image");

  std::vector<Element> h1, o1, h2, o2;
  collect_elements(pairs1, h1, o1);
  collect_elements(pairs2, h2, o2);
  const std::size_t keep = h1.size() * o1.size() + h2.size() * o2.size();

  std::vector<Element> humans = h1;
  humans.insert(humans.end(), h2.begin(), h2.end());
  std::vector<Element> objects = o1;
  objects.insert(objects.end(), o2.begin(), o2.end());

  struct Candidate {
    double score;
    bool swapped;
    std::size_t h;
    std::size_t o;
  };
  std::vector<Candidate> pool;
  pool.reserve(humans.size() * objects.size());
  for (std::size_t h = 0; h < humans.size(); ++h)
    for (std::size_t o = 0; o < objects.size(); ++o)
      pool.push_back({scorer(humans[h].det, objects[o].det), humans[h].image != objects[o].image, h, o});

  // Best first: higher score, then same-image before swapped, then source order.
  std::vector<std::size_t> rank(pool.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    const Candidate& x = pool[a];
    const Candidate& y = pool[b];
    if (x.score != y.score) return x.score > y.score;
    if (x.swapped != y.swapped) return !x.swapped;
    return std::tie(humans[x.h].image, humans[x.h].index, objects[x.o].image, objects[x.o].index) <
           std::tie(humans[y.h].image, humans[y.h].index, objects[y.o].image, objects[y.o].index);
  });
  std::vector<bool> kept(pool.size(), false);
  for (std::size_t r = 0; r < keep; ++r) kept[rank[r]] = true;

  // Emit in pool order so the output is independent of score magnitudes.
  std::vector<HumanObjectPair> out;
  out.reserve(keep);
  for (std::size_t k = 0; k < pool.size(); ++k) {
    if (!kept[k]) continue;
    const Element& h = humans[pool[k].h];
    const Element& o = objects[pool[k].o];
    HumanObjectPair p;
    p.human = h.det;
    p.object = o.det;
    p.human_image = h.image;
    p.object_image = o.image;
    p.human_index = h.index;
    p.object_index = o.index;
    p.swapped = h.image != o.image;
    p.features = features.pair_features(h.det, h.image, o.det, o.image);
    out.push_back(std::move(p));
  }
  return out;
}

Eigen::MatrixXd make_fs_targets(std::span<const HumanObjectPair> pairs,
                                std::span<const GtTriplet> gt_triplets, int n_classes,
                                double iou_threshold) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pairs.size()), n_classes);
  for (const GtTriplet& gt : gt_triplets) {
    if (gt.hoi_class < 0 || gt.hoi_class >= n_classes) {
      throw std::out_of_range("make_fs_targets: class " + std::to_string(gt.hoi_class) +
                              " outside [0, " + std::to_string(n_classes) + ")");
    }
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const BoxPair pb = pairs[i].boxes();
    for (const GtTriplet& gt : gt_triplets) {
      if (pair_iou(pb, {gt.human, gt.object}) >= iou_threshold)
        y(static_cast<Eigen::Index>(i), gt.hoi_class) = 1.0;
    }
  }
  return y;
}

Eigen::VectorXd make_ws_targets(std::span<const int> first_labels,
                                std::span<const int> second_labels, int n_classes) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n_classes);
  for (auto labels : {first_labels, second_labels}) {
    for (int c : labels) {
      if (c < 0 || c >= n_classes)
        throw std::out_of_range("make_ws_targets: class " + std::to_string(c) + " out of range");
      y(c) = 1.0;
    }
  }
  return y;
}

Schedule batch_schedule(const World& world, std::uint64_t seed, long min_batches) {
  std::map<SupervisionTag, std::vector<int>> sets;
  for (const SynthImage& img : world.images) sets[img.supervision].push_back(img.image_id);

  Schedule schedule;
  for (auto& [tag, ids] : sets) {
    schedule.leftover_per_epoch[tag] = static_cast<int>(ids.size() % 2);
    schedule.batches_per_epoch += static_cast<int>(ids.size() / 2);
    if (ids.size() == 1) schedule.unbatchable.push_back(tag);
  }
  if (schedule.batches_per_epoch == 0) {
    throw std::invalid_argument("batch_schedule: no supervision set has two images to pair");
  }

  std::mt19937_64 rng(seed);
  do {
    std::vector<ScheduledBatch> epoch;
    for (auto& [tag, ids] : sets) {
      std::vector<int> shuffled = ids;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      for (std::size_t k = 0; k + 1 < shuffled.size(); k += 2) {
        epoch.push_back({shuffled[k], shuffled[k + 1], tag, tag == SupervisionTag::WS, schedule.epochs});
      }
    }
    std::shuffle(epoch.begin(), epoch.end(), rng);
    schedule.batches.insert(schedule.batches.end(), epoch.begin(), epoch.end());
    ++schedule.epochs;
  } while (static_cast<long>(schedule.batches.size()) < min_batches);
  return schedule;
}

Eigen::MatrixXd MiniBatch::feature_matrix() const {
  if (pairs.empty()) throw std::invalid_argument("MiniBatch: no pairs");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(pairs.size()), pairs.front().features.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = pairs[i].features.transpose();
  return x;
}

void MiniBatch::validate() const {
  const bool region = supervision == SupervisionTag::FS || supervision == SupervisionTag::US;
  if (region && (!fs_targets || ws_targets))
    throw std::invalid_argument("MiniBatch: region-level batch needs exactly fs_targets");
  if (!region && (!ws_targets || fs_targets))
    throw std::invalid_argument("MiniBatch: WS batch needs exactly ws_targets");
  if (fs_targets && fs_targets->rows() != static_cast<Eigen::Index>(pairs.size()))
    throw std::invalid_argument("MiniBatch: fs_targets row count differs from pair count");
  if (image_ids[0] == image_ids[1]) throw std::invalid_argument("MiniBatch: needs two distinct images");
}

}  // namespace mxhoi
