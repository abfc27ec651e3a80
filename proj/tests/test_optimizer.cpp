#include <random>

#include <doctest.h>

#include "mxhoi/optimizer.hpp"

using namespace mxhoi;

namespace {

ModelParamsd filled(const ModelParamsd& like, double v) {
  ModelParamsd g = like.zeros_like();
  g.for_each_tensor([v](const char*, auto& t) { t.setConstant(v); });
  return g;
}

ModelParamsd random_grad(const ModelParamsd& like, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  ModelParamsd g = like.zeros_like();
  g.for_each_tensor([&](const char*, auto& t) {
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = n(rng);
  });
  return g;
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("hand-evaluated heavy-ball steps") {
  OptimizerConfig cfg;
  cfg.alpha_ws = 0.1;
  cfg.beta = 0.9;
  ModelParamsd w = ModelParamsd::init(1, 1, 1, 3);
  const ModelParamsd w0 = w;
  auto state = MomentumState<double>::zeros_like(w);
  const ModelParamsd g = filled(w, 1.0);

  step(w, g, SupervisionTag::WS, state, cfg);
  CHECK(state.z_ws.cls_w(0, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(w0.cls_w(0, 0) - w.cls_w(0, 0) == doctest::Approx(0.1).epsilon(1e-12));

  step(w, g, SupervisionTag::WS, state, cfg);
  CHECK(state.z_ws.cls_w(0, 0) == doctest::Approx(0.19).epsilon(1e-15));
  CHECK(state.t == 2);
}

TEST_CASE("WS-only stream leaves the FS buffer at zero") {
  OptimizerConfig cfg;
  std::mt19937_64 rng(1);
  ModelParamsd w = ModelParamsd::init(3, 4, 2, 1);
  auto state = MomentumState<double>::zeros_like(w);
  for (int k = 0; k < 5; ++k) step(w, random_grad(w, rng), SupervisionTag::WS, state, cfg);
  CHECK(state.z_fs == w.zeros_like());
}

TEST_CASE("Independent buffers replay bit-exactly") {
  OptimizerConfig cfg;
  std::mt19937_64 rng(2);
  const ModelParamsd w0 = ModelParamsd::init(3, 4, 2, 5);
  ModelParamsd w = w0;
  auto state = MomentumState<double>::zeros_like(w);
  std::vector<std::pair<SupervisionTag, ModelParamsd>> stream;
  std::bernoulli_distribution coin(0.5);
  for (int k = 0; k < 30; ++k) {
    const SupervisionTag tag = coin(rng) ? SupervisionTag::WS : SupervisionTag::FS;
    stream.emplace_back(tag, random_grad(w, rng));
    step(w, stream.back().second, tag, state, cfg);
  }
  for (SupervisionTag only : {SupervisionTag::FS, SupervisionTag::WS}) {
    ModelParamsd w2 = w0;
    auto replay = MomentumState<double>::zeros_like(w0);
    for (const auto& [tag, g] : stream)
      if (tag == only) step(w2, g, tag, replay, cfg);
    if (only == SupervisionTag::FS) CHECK(replay.z_fs == state.z_fs);
    else CHECK(replay.z_ws == state.z_ws);
  }
}

TEST_CASE("single-type streams do not depend on the policy") {
  std::mt19937_64 rng(3);
  const ModelParamsd w0 = ModelParamsd::init(3, 4, 2, 7);
  std::vector<ModelParamsd> grads;
  for (int k = 0; k < 20; ++k) grads.push_back(random_grad(w0, rng));
  for (SupervisionTag tag : {SupervisionTag::FS, SupervisionTag::WS}) {
    OptimizerConfig ind, shared;
    shared.policy = MomentumPolicy::Shared;
    ModelParamsd a = w0, b = w0;
    auto sa = MomentumState<double>::zeros_like(w0), sb = sa;
    for (const auto& g : grads) {
      step(a, g, tag, sa, ind);
      step(b, g, tag, sb, shared);
      REQUIRE(a == b);
    }
  }
}

TEST_CASE("Shared policy keeps one buffer for both tags") {
  OptimizerConfig cfg;
  cfg.policy = MomentumPolicy::Shared;
  cfg.alpha_ws = 0.1;
  cfg.alpha_fs = 0.01;
  cfg.beta = 0.5;
  ModelParamsd w = ModelParamsd::init(1, 1, 1, 1);
  auto state = MomentumState<double>::zeros_like(w);
  const ModelParamsd g = filled(w, 1.0);
  step(w, g, SupervisionTag::WS, state, cfg);
  step(w, g, SupervisionTag::FS, state, cfg);
  CHECK(state.z_ws.sel_b(0) == doctest::Approx(0.5 * 0.1 + 0.01).epsilon(1e-15));
  CHECK(state.z_fs == w.zeros_like());
}

TEST_CASE("zero gradient from rest is a no-op") {
  OptimizerConfig cfg;
  ModelParamsd w = ModelParamsd::init(3, 2, 2, 4);
  const ModelParamsd before = w;
  auto state = MomentumState<double>::zeros_like(w);
  step(w, w.zeros_like(), SupervisionTag::FS, state, cfg);
  CHECK(w == before);
}

TEST_CASE("pseudo-labeled US batches use the FS buffer and step size") {
  OptimizerConfig cfg;
  cfg.alpha_fs = 0.25;
  ModelParamsd w = ModelParamsd::init(1, 1, 1, 1);
  auto state = MomentumState<double>::zeros_like(w);
  step(w, filled(w, 1.0), SupervisionTag::US, state, cfg, true);
  CHECK(state.z_fs.cls_b(0) == 0.25);
  CHECK(state.z_ws == w.zeros_like());
  CHECK_THROWS_AS(step(w, filled(w, 1.0), SupervisionTag::US, state, cfg, false), std::invalid_argument);
}

TEST_CASE("shape mismatch is rejected") {
  OptimizerConfig cfg;
  ModelParamsd w = ModelParamsd::init(2, 2, 2, 1);
  auto state = MomentumState<double>::zeros_like(w);
  CHECK_THROWS_AS(step(w, ModelParamsd::init(2, 3, 2, 1), SupervisionTag::FS, state, cfg), std::invalid_argument);
}

TEST_CASE("sequence schedule filter") {
  OptimizerConfig cfg;
  cfg.policy = MomentumPolicy::SequenceFsFirst;
  cfg.sequence_switch_iteration = 100;
  CHECK(schedule_filter(SupervisionTag::WS, 10, cfg) == ScheduleDecision::Skip);
  CHECK(schedule_filter(SupervisionTag::FS, 10, cfg) == ScheduleDecision::Accept);
  CHECK(schedule_filter(SupervisionTag::WS, 150, cfg) == ScheduleDecision::Accept);

  cfg.policy = MomentumPolicy::SequenceWsFirst;
  CHECK(schedule_filter(SupervisionTag::FS, 10, cfg) == ScheduleDecision::Skip);
  CHECK(schedule_filter(SupervisionTag::WS, 10, cfg) == ScheduleDecision::Accept);

  cfg.sequence_switch_iteration = -1;
  CHECK(schedule_filter(SupervisionTag::FS, 499, cfg, 1000) == ScheduleDecision::Skip);
  CHECK(schedule_filter(SupervisionTag::FS, 500, cfg, 1000) == ScheduleDecision::Accept);

  cfg.policy = MomentumPolicy::Shared;
  CHECK(schedule_filter(SupervisionTag::WS, 0, cfg, 1000) == ScheduleDecision::Accept);
}

TEST_CASE("config validation and policy names") {
  OptimizerConfig cfg;
  cfg.beta = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg.beta = 0.9;
  cfg.alpha_fs = 0.0;
  CHECK_THROWS(cfg.validate());
  for (MomentumPolicy p : {MomentumPolicy::Shared, MomentumPolicy::Independent, MomentumPolicy::SequenceFsFirst,
                           MomentumPolicy::SequenceWsFirst})
    CHECK(parse_policy(to_string(p)) == p);
  CHECK_THROWS(parse_policy("adam"));
}

}
