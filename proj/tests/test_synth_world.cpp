#include <cmath>
#include <set>

#include <doctest.h>

#include "mxhoi/synth_world.hpp"

using namespace mxhoi;

namespace {

WorldConfig small_config() {
  WorldConfig c;
  c.n_images = 300;
  c.n_hoi_classes = 12;
  c.n_object_classes = 4;
  c.n_verb_classes = 4;
  return c;
}

}  // namespace

TEST_SUITE("synth_world") {

TEST_CASE("same seed, same world") {
  const World a = generate_world(small_config());
  const World b = generate_world(small_config());
  CHECK(a.images == b.images);
  WorldConfig other = small_config();
  other.seed = 2;
  CHECK_FALSE(generate_world(other).images == a.images);
}

TEST_CASE("collapsed ranges give one human and one object per image") {
  WorldConfig c = small_config();
  c.humans_per_image = {1, 1};
  c.objects_per_image = {1, 1};
  c.n_images = 200;
  const World w = generate_world(c);
  for (const SynthImage& img : w.images) {
    REQUIRE(img.gt_triplets.size() == 1);
    // two real detections plus distractor_ratio times as many distractors
    REQUIRE(img.human_detections.size() + img.object_detections.size() == 2 + 4);
    REQUIRE_FALSE(img.human_detections.empty());
    REQUIRE_FALSE(img.object_detections.empty());
  }
}

TEST_CASE("long tail: rare classes sit below ten images, the rest at or above") {
  const World w = generate_world(WorldConfig{});
  const std::vector<int> counts = class_image_counts(w.images, w.n_hoi_classes());
  const std::vector<int> rare = rare_classes(w);
  CHECK(rare.size() == 6);
  std::set<int> rs(rare.begin(), rare.end());
  for (int c = 0; c < w.n_hoi_classes(); ++c) {
    CHECK(counts[c] >= 1);
    CHECK((counts[c] < 10) == (rs.count(c) == 1));
  }
}

TEST_CASE("full-scale class counts: 138 of 600 rare") {
  WorldConfig c;
  c.n_object_classes = 80;
  c.n_verb_classes = 10;
  c.n_hoi_classes = 600;
  c.rare_class_fraction = 0.23;
  c.n_images = 4000;
  c.objects_per_image = {1, 3};
  const World w = generate_world(c);
  CHECK(rare_classes(w).size() == 138);
  CHECK(w.n_hoi_classes() - rare_classes(w).size() == 462);
}

TEST_CASE("gt triplets agree with detections and labels") {
  const World w = generate_world(small_config());
  std::set<std::pair<int, int>> hoi_pairs;
  for (const HoiClass& h : w.hoi_classes) hoi_pairs.insert({h.verb, h.object_class});
  CHECK(hoi_pairs.size() == w.hoi_classes.size());
  for (const SynthImage& img : w.images) {
    std::set<int> labels;
    for (const GtTriplet& t : img.gt_triplets) {
      labels.insert(t.hoi_class);
      REQUIRE(t.human.valid());
      REQUIRE(t.object.valid());
    }
    REQUIRE(std::vector<int>(labels.begin(), labels.end()) == img.image_labels);
    for (const Detection& d : img.human_detections) REQUIRE(d.is_human());
    for (const Detection& d : img.object_detections) {
      REQUIRE(d.class_id >= 0);
      REQUIRE(d.confidence > 0.0);
      REQUIRE(d.confidence <= 1.0);
    }
  }
}

TEST_CASE("test stream shares the class structure but not the images") {
  const WorldConfig train_cfg = small_config();
  WorldConfig test_cfg = train_cfg;
  test_cfg.stream = 1;
  const World train = generate_world(train_cfg);
  const World test = generate_world(test_cfg);
  for (std::size_t c = 0; c < train.hoi_classes.size(); ++c) {
    CHECK(train.hoi_classes[c].verb == test.hoi_classes[c].verb);
    CHECK(train.hoi_classes[c].object_class == test.hoi_classes[c].object_class);
  }
  CHECK(test.images.front().image_id == 1'000'000);
  CHECK(test.index_of(1'000'005) == 5);
  CHECK_THROWS_AS(test.index_of(5), std::out_of_range);
  CHECK_FALSE(test.images.front().gt_triplets == train.images.front().gt_triplets);
}

TEST_CASE("features are deterministic and laid out as appearance then layout") {
  const World w = generate_world(small_config());
  const SynthImage& img = w.images[3];
  const Detection& h = img.human_detections[0];
  const Detection& o = img.object_detections[0];
  const Eigen::VectorXd f1 = extract_features(w, img, h, o);
  const Eigen::VectorXd f2 = extract_features(w, img, h, o);
  CHECK(f1 == f2);
  CHECK(f1.size() == w.config.feature_dim);
  CHECK(f1.tail(FeatureSpace::kLayoutDims) == FeatureSpace::layout(h.box, o.box));
  CHECK(w.features.object_dims() + w.features.human_dims() + FeatureSpace::kLayoutDims == w.config.feature_dim);
}

TEST_CASE("swapped pairs take the layout of the two boxes as given") {
  const World w = generate_world(small_config());
  const SynthImage& a = w.images[0];
  const SynthImage& b = w.images[1];
  const Detection& h = a.human_detections[0];
  const Detection& o = b.object_detections[0];
  const Eigen::VectorXd f = w.features.pair_features(h, a.image_id, o, b.image_id);
  CHECK(f.tail(FeatureSpace::kLayoutDims) == FeatureSpace::layout(h.box, o.box));
  CHECK(f.head(w.features.object_dims()) == w.features.appearance(o, b.image_id));
  CHECK(f.segment(w.features.object_dims(), w.features.human_dims()) == w.features.appearance(h, a.image_id));
}

TEST_CASE("appearance noise stays within three sigma of the prototype") {
  WorldConfig c = small_config();
  c.feature_noise_sigma = 0.5;
  const World w = generate_world(c);
  const Detection det{Box{10, 10, 50, 60}, 2, 0.9};
  const Eigen::VectorXd proto = w.features.prototype(2);
  long inside = 0, total = 0;
  double sum_sq = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const Eigen::VectorXd v = w.features.appearance(det, 5000 + draw);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const double dev = v(k) - proto(k);
      inside += std::abs(dev) <= 3 * c.feature_noise_sigma;
      sum_sq += dev * dev;
      ++total;
    }
  }
  CHECK(double(inside) / double(total) >= 0.99);
  CHECK(std::sqrt(sum_sq / double(total)) == doctest::Approx(c.feature_noise_sigma).epsilon(0.05));
}

TEST_CASE("supervision split fractions and stripping") {
  const World w = generate_world(WorldConfig{});
  const World tagged = split_supervision(w, 0.7, 0.3, 0.0, 3);
  int ws = 0, fs = 0;
  for (const SynthImage& img : tagged.images) {
    if (img.supervision == SupervisionTag::WS) {
      ++ws;
      REQUIRE(img.gt_triplets.empty());
      REQUIRE_FALSE(img.image_labels.empty());
    } else {
      ++fs;
      REQUIRE_FALSE(img.gt_triplets.empty());
    }
  }
  CHECK(std::abs(ws - 560) <= 1);
  CHECK(std::abs(fs - 240) <= 1);

  const World all_fs = split_supervision(w, 0.0, 1.0, 0.0, 3);
  for (const SynthImage& img : all_fs.images) CHECK(img.supervision == SupervisionTag::FS);

  const World three = split_supervision(w, 0.3, 0.4, 0.3, 3);
  int counts[3] = {0, 0, 0};
  for (const SynthImage& img : three.images) {
    ++counts[static_cast<int>(img.supervision)];
    if (img.supervision == SupervisionTag::US) {
      REQUIRE(img.gt_triplets.empty());
      REQUIRE(img.image_labels.empty());
    }
  }
  CHECK(std::abs(counts[static_cast<int>(SupervisionTag::FS)] - 320) <= 1);
  CHECK(std::abs(counts[static_cast<int>(SupervisionTag::WS)] - 240) <= 1);
  CHECK(std::abs(counts[static_cast<int>(SupervisionTag::US)] - 240) <= 1);

  CHECK_THROWS_AS(split_supervision(w, 0.5, 0.3, 0.0, 1), std::invalid_argument);
  CHECK(split_supervision(w, 0.7, 0.3, 0.0, 3).images == tagged.images);
}

TEST_CASE("infeasible configs name the offending field") {
  WorldConfig c;
  c.feature_dim = 6;
  try {
    c.validate();
    FAIL("expected InfeasibleConfig");
  } catch (const InfeasibleConfig& e) {
    CHECK(e.field() == "feature_dim");
  }
  WorldConfig many = small_config();
  many.n_hoi_classes = 17;
  CHECK_THROWS_AS(generate_world(many), InfeasibleConfig);
  WorldConfig tiny = small_config();
  tiny.n_images = 20;
  try {
    generate_world(tiny);
    FAIL("expected InfeasibleConfig");
  } catch (const InfeasibleConfig& e) {
    CHECK(e.field() == "n_images");
  }
  WorldConfig bad_range = small_config();
  bad_range.humans_per_image = {2, 1};
  CHECK_THROWS_AS(generate_world(bad_range), InfeasibleConfig);
}

}
