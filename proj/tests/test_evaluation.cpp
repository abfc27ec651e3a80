#include <cmath>
#include <random>

#include <doctest.h>

#include "mxhoi/batching.hpp"
#include "mxhoi/evaluation.hpp"
#include "oracles.hpp"

using namespace mxhoi;

namespace {

HOIPrediction pred(int image, Box h, Box o, double score) { return {image, h, o, 0, score}; }

const Box kH{0, 0, 10, 10};
const Box kO{20, 0, 30, 10};
const Box kH2{100, 100, 110, 110};
const Box kO2{120, 100, 130, 110};
const Box kFar{300, 300, 310, 310};

Box shifted(const Box& b, double dx) { return {b.x_min + dx, b.y_min, b.x_max + dx, b.y_max}; }

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("perfect single match") {
  const std::vector<GtInstance> gt{{1, kH, kO}};
  const std::vector<HOIPrediction> p{pred(1, kH, kO, 0.3)};
  CHECK(*match_and_ap(p, gt) == 1.0);
}

TEST_CASE("one hit then one miss over two gt") {
  const std::vector<GtInstance> gt{{1, kH, kO}, {1, kH2, kO2}};
  const std::vector<HOIPrediction> p{pred(1, kH, kO, 0.9), pred(1, kFar, kFar, 0.5)};
  // PR points (1, 0.5) then (0.5, 0.5)
  CHECK(oracle::brute_force_ap(p, gt) == doctest::Approx(0.5));
  CHECK(*match_and_ap(p, gt) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("duplicate detections of one gt count once") {
  const std::vector<GtInstance> gt{{1, kH, kO}, {1, kH2, kO2}};
  const std::vector<HOIPrediction> p{pred(1, kH, kO, 0.9), pred(1, shifted(kH, 1), shifted(kO, 1), 0.8),
                                     pred(1, kH2, kO2, 0.7)};
  // TP, FP, TP: 0.5 * 1 + 0.5 * 2/3
  const double expected = oracle::brute_force_ap(p, gt);
  CHECK(expected == doctest::Approx(0.5 + 1.0 / 3.0).epsilon(1e-14));
  CHECK(*match_and_ap(p, gt) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("matching never crosses images") {
  const std::vector<GtInstance> gt{{1, kH, kO}};
  const std::vector<HOIPrediction> p{pred(2, kH, kO, 0.9)};
  CHECK(*match_and_ap(p, gt) == 0.0);
}

TEST_CASE("threshold is inclusive on the weaker box") {
  const Box half{0, 0, 10, 5};  // IoU 0.5 with kH
  const std::vector<GtInstance> gt{{1, kH, kO}};
  CHECK(*match_and_ap(std::vector<HOIPrediction>{pred(1, half, kO, 1.0)}, gt, 0.5) == 1.0);
  CHECK(*match_and_ap(std::vector<HOIPrediction>{pred(1, half, kO, 1.0)}, gt, 0.51) == 0.0);
}

TEST_CASE("no gt means undefined, no predictions means zero") {
  CHECK_FALSE(match_and_ap(std::vector<HOIPrediction>{pred(1, kH, kO, 1.0)}, std::vector<GtInstance>{}));
  CHECK(*match_and_ap(std::vector<HOIPrediction>{}, std::vector<GtInstance>{{1, kH, kO}}) == 0.0);
}

TEST_CASE("random instances agree with the brute-force matcher") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> img(0, 2);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<GtInstance> gt;
    const int n_gt = 1 + trial % 4;
    for (int g = 0; g < n_gt; ++g) {
      const double x = 40.0 * g;
      gt.push_back({img(rng), Box{x, 0, x + 10, 10}, Box{x + 5, 20, x + 15, 30}});
    }
    std::vector<HOIPrediction> p;
    for (int k = 0; k < 10; ++k) {
      const GtInstance& near = gt[k % gt.size()];
      const double jitter = 6.0 * u(rng);
      const double score = trial % 3 == 0 ? std::round(u(rng) * 4) / 4 : u(rng);  // some ties
      p.push_back({img(rng), shifted(near.human_box, jitter), shifted(near.object_box, jitter / 2), 0, score});
    }
    REQUIRE(*match_and_ap(p, gt) == doctest::Approx(oracle::brute_force_ap(p, gt)).epsilon(1e-12));
  }
}

TEST_CASE("AP is invariant to monotone score maps and never rises with a trailing false positive") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<GtInstance> gt{{0, kH, kO}, {0, kH2, kO2}, {1, kH, kO}};
    std::vector<HOIPrediction> p;
    for (int k = 0; k < 8; ++k) {
      const GtInstance& g = gt[k % 3];
      p.push_back({int(k % 2), shifted(g.human_box, 5 * u(rng)), g.object_box, 0, u(rng)});
    }
    const double ap = *match_and_ap(p, gt);
    REQUIRE(ap >= 0.0);
    REQUIRE(ap <= 1.0);
    std::vector<HOIPrediction> q = p;
    for (auto& x : q) x.score = std::exp(3 * x.score) + 7;
    REQUIRE(*match_and_ap(q, gt) == ap);
    p.push_back({0, kFar, kFar, 0, -1.0});
    REQUIRE(*match_and_ap(p, gt) <= ap);
  }
}

TEST_CASE("report means over defined classes") {
  std::vector<SynthImage> images(2);
  images[0].image_id = 1;
  images[0].gt_triplets = {{kH, kO, 0}, {kH2, kO2, 2}};
  images[1].image_id = 2;
  images[1].gt_triplets = {{kH, kO, 2}};
  std::vector<HOIPrediction> p{{1, kH, kO, 0, 0.9}, {1, kH2, kO2, 2, 0.8}, {2, kFar, kFar, 2, 0.95},
                               {2, kH, kO, 1, 0.5}};
  const EvalReport r = evaluate_predictions(p, images, 4, {2});
  REQUIRE(r.ap_per_class.size() == 4);
  CHECK(r.ap_per_class[0] == 1.0);
  CHECK_FALSE(r.ap_per_class[1]);
  CHECK_FALSE(r.ap_per_class[3]);
  // class 2: FP, TP, miss over 2 gt -> 0.5 * 0.5
  const std::vector<GtInstance> gt2{{1, kH2, kO2}, {2, kH, kO}};
  const std::vector<HOIPrediction> p2{p[1], p[2]};
  CHECK(*r.ap_per_class[2] == doctest::Approx(oracle::brute_force_ap(p2, gt2)));
  double sum = 0;
  int n = 0;
  for (const auto& ap : r.ap_per_class)
    if (ap) {
      sum += *ap;
      ++n;
    }
  CHECK(r.map_full == doctest::Approx(sum / n).epsilon(1e-15));
  CHECK(r.map_rare == *r.ap_per_class[2]);
  CHECK(r.map_nonrare == 1.0);
  CHECK(subset_map(r, {1, 3}) != subset_map(r, {1, 3}));  // NaN

  const EvalReport no_rare = evaluate_predictions(p, images, 4, {});
  CHECK(std::isnan(no_rare.map_rare));
  CHECK_THROWS_AS(evaluate_predictions(p, {}, 4, {}), std::invalid_argument);
}

TEST_CASE("oracle scores reach 1, random scores stay well below") {
  WorldConfig c;
  c.n_images = 400;
  c.stream = 1;
  const World w = generate_world(c);
  std::vector<HOIPrediction> candidates;
  for (const SynthImage& img : w.images)
    for (const HumanObjectPair& pr : build_pairs(img, w.features, 30))
      for (int k = 0; k < w.n_hoi_classes(); ++k) candidates.push_back({img.image_id, pr.human.box, pr.object.box, k, 0.0});

  std::vector<HOIPrediction> spiked = candidates;
  for (const SynthImage& img : w.images)
    for (const GtTriplet& t : img.gt_triplets) spiked.push_back({img.image_id, t.human, t.object, t.hoi_class, 1.0});
  const EvalReport best = evaluate_predictions(spiked, w.images, w.n_hoi_classes(), {});
  CHECK(best.map_full == 1.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  double mean = 0;
  for (int seed = 0; seed < 20; ++seed) {
    std::vector<HOIPrediction> random = candidates;
    for (auto& x : random) x.score = u(rng);
    const double m = evaluate_predictions(random, w.images, w.n_hoi_classes(), {}).map_full;
    REQUIRE(m < best.map_full);
    mean += m / 20;
  }
  // roughly the fraction of candidates that hit a gt of their class
  CHECK(mean < 0.1);
}

TEST_CASE("model predictions cover every pair and class") {
  WorldConfig c;
  c.n_images = 120;
  c.n_hoi_classes = 8;
  const World w = generate_world(c);
  const ModelParamsd m = ModelParamsd::init(c.feature_dim, 8, w.n_hoi_classes(), 1);
  std::size_t expected = 0;
  for (const SynthImage& img : w.images) expected += build_pairs(img, w.features, 30).size() * w.n_hoi_classes();
  CHECK(collect_predictions(m, w, 30).size() == expected);
  const EvalReport r = evaluate(m, w, rare_classes(w));
  CHECK(r.map_full >= 0.0);
  CHECK(r.map_full <= 1.0);
}

}
