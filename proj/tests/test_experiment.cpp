#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "fixtures.hpp"
#include "mxhoi/io.hpp"

using namespace mxhoi;

TEST_SUITE("experiment") {

TEST_CASE("ratio labels and parsing") {
  CHECK(SupervisionRatio{0.7, 0.3, 0.0}.label() == "70/30/0");
  const SupervisionRatio r = SupervisionRatio::parse("30/40/30");
  CHECK(r.ws == doctest::Approx(0.3));
  CHECK(r.fs == doctest::Approx(0.4));
  CHECK(r.us == doctest::Approx(0.3));
  const SupervisionRatio partial = SupervisionRatio::parse("30/50");
  CHECK(partial.us == doctest::Approx(0.2));
  CHECK(SupervisionRatio::parse("100/0").us == 0.0);
  CHECK_THROWS(SupervisionRatio::parse("70/40"));
  CHECK_THROWS(SupervisionRatio::parse("30/40/20"));
  CHECK_THROWS(SupervisionRatio::parse("70"));
  CHECK_THROWS(SupervisionRatio::parse("a/b"));
  CHECK_THROWS(SupervisionRatio::parse("-10/110"));
}

TEST_CASE("config validation and evaluation cadence") {
  ExperimentConfig c = quick_config();
  c.eval_every = -1;
  c.iterations = 5000;
  CHECK(c.eval_cadence() == 500);
  c.iterations = 1000;
  CHECK(c.eval_cadence() == 200);
  c.eval_every = 0;
  CHECK(c.eval_cadence() == 0);
  c.hidden_dim = 0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("identical seeds reproduce the run exactly") {
  const ExperimentConfig c = quick_config(7);
  const RunResult a = run_experiment(c);
  const RunResult b = run_experiment(c);
  CHECK(a.training.params == b.training.params);
  CHECK(a.training.momentum == b.training.momentum);
  CHECK(csv_row(c, a.report) == csv_row(c, b.report));
  CHECK(a.training.log == b.training.log);
  ExperimentConfig other = c;
  other.seed = 8;
  CHECK_FALSE(run_experiment(other).training.params == a.training.params);
}

TEST_CASE("run log records the config and iteration accounting") {
  ExperimentConfig c = quick_config();
  c.eval_every = 100;
  const RunResult r = run_experiment(c);
  const auto& log = r.training.log;
  CHECK(log[1].rfind("# config {", 0) == 0);
  CHECK(std::any_of(log.begin(), log.end(),
                    [](const std::string& l) { return l.find("iteration accounting") != std::string::npos; }));
  CHECK(std::count_if(log.begin(), log.end(), [](const std::string& l) { return l.rfind("eval iter=", 0) == 0; }) == 3);
  CHECK(r.training.accepted_batches == c.iterations);
  CHECK(std::isfinite(r.training.final_loss_ws));
}

TEST_CASE("ablation arms differ only in the flag under test") {
  ExperimentConfig on = quick_config();
  ExperimentConfig off = on;
  off.hes = false;
  CHECK(config_diff(to_json(on), to_json(off)) == std::vector<std::string>{"hes"});
  ExperimentConfig shared = on;
  shared.optimizer.policy = MomentumPolicy::Shared;
  CHECK(config_diff(to_json(on), to_json(shared)) == std::vector<std::string>{"optimizer.policy"});
}

TEST_CASE("sequence policies skip the deferred stream but spend its iterations") {
  ExperimentConfig c = quick_config();
  c.optimizer.policy = MomentumPolicy::SequenceFsFirst;
  const RunResult r = run_experiment(c);
  CHECK(r.training.skipped_batches > 0);
  CHECK(r.training.accepted_batches + r.training.skipped_batches == c.iterations);
}

TEST_CASE("checkpoint resume continues the same trajectory") {
  ExperimentConfig full = quick_config(9);
  const World w = split_supervision(generate_world(full.world), 0.7, 0.3, 0.0, full.seed);
  const TrainResult straight = train(w, full);
  ExperimentConfig half = full;
  half.iterations = 120;
  const TrainResult first = train(w, half);
  const TrainResult resumed = train_from(w, full, first.params, first.momentum, 120);
  CHECK(resumed.params == straight.params);
  CHECK(resumed.momentum.z_ws == straight.momentum.z_ws);
  CHECK(resumed.momentum.z_fs == straight.momentum.z_fs);
}

TEST_CASE("divergence aborts the run") {
  ExperimentConfig c = quick_config();
  c.optimizer.alpha_ws = 1e300;
  c.optimizer.alpha_fs = 1e300;
  CHECK_THROWS_AS(run_experiment(c), TrainingAborted);
}

TEST_CASE("unlabeled images without pseudo labels are not trained on") {
  ExperimentConfig c = quick_config();
  const World w = split_supervision(generate_world(c.world), 0.0, 0.0, 1.0, 1);
  CHECK_THROWS_AS(train(w, c), std::invalid_argument);
}

TEST_CASE("sweep produces one row per cell and seed") {
  ExperimentConfig c = quick_config();
  c.iterations = 60;
  const SweepResult one = run_ratio_sweep(c, {SupervisionRatio::parse("70/30")}, {1});
  CHECK(one.rows.size() == 1);
  REQUIRE(one.cells.size() == 1);
  CHECK(one.cells[0].n_seeds == 1);
  CHECK(one.cells[0].std_full == 0.0);

  std::vector<SupervisionRatio> table;
  for (const char* r : {"100/0", "80/20", "70/30", "50/50", "30/70", "20/80", "0/100"})
    table.push_back(SupervisionRatio::parse(r));
  int observed = 0;
  const SweepResult seven = run_ratio_sweep(c, table, {1, 2}, [&](const RunResult&) { ++observed; });
  CHECK(seven.cells.size() == 7);
  CHECK(seven.rows.size() == 14);
  CHECK(observed == 14);

  std::vector<SupervisionRatio> fixed_ws;
  for (const char* r : {"30/30", "30/50", "30/70", "50/30", "70/30"}) fixed_ws.push_back(SupervisionRatio::parse(r));
  CHECK(run_ratio_sweep(c, fixed_ws, {1}).cells.size() == 5);
}

TEST_CASE("csv layout") {
  CHECK(csv_header() == "run_id,ws_fs_us,policy,hes,seed,map_full,map_rare,map_nonrare");
  ExperimentConfig c = quick_config();
  EvalReport r;
  r.map_full = 0.5;
  r.map_rare = std::nan("");
  r.map_nonrare = 0.25;
  const std::string row = csv_row(c, r);
  CHECK(row.rfind("quick,70/30/0,independent,on,1,", 0) == 0);
  CHECK(std::count(row.begin(), row.end(), ',') == 7);
}

TEST_CASE("class split tags images by class half") {
  const ExperimentConfig c = quick_config();
  const World w = generate_world(c.world);
  const std::vector<int> fs_half{0, 2, 4, 6};
  std::size_t dropped = 0;
  const World split = class_split_world(w, fs_half, &dropped);
  const std::set<int> fs_set(fs_half.begin(), fs_half.end());
  for (const SynthImage& img : split.images) {
    const bool any_fs = std::any_of(img.image_labels.begin(), img.image_labels.end(), [&](int l) { return fs_set.count(l); });
    const bool all_fs = std::all_of(img.image_labels.begin(), img.image_labels.end(), [&](int l) { return fs_set.count(l); });
    CHECK(any_fs == all_fs);
    CHECK(img.supervision == (all_fs ? SupervisionTag::FS : SupervisionTag::WS));
  }
  CHECK(split.images.size() + dropped == w.images.size());

  const ClassSplitResult r = run_class_split(w, make_test_world(c), c);
  CHECK(r.fs_classes.size() + r.ws_classes.size() == std::size_t(w.n_hoi_classes()));
  for (double m : {r.separate_fs_map, r.separate_ws_map, r.joint_fs_map, r.joint_ws_map}) {
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
  const ClassSplitResult again = run_class_split(w, make_test_world(c), c);
  CHECK(again.fs_classes == r.fs_classes);
  CHECK(again.joint_fs_map == r.joint_fs_map);
}

TEST_CASE("label permutation keeps the class histogram") {
  const World w = generate_world(quick_config().world);
  const World p = permute_hoi_labels(w, 3);
  std::vector<int> before, after;
  bool changed = false;
  for (std::size_t k = 0; k < w.images.size(); ++k) {
    for (const GtTriplet& t : w.images[k].gt_triplets) before.push_back(t.hoi_class);
    for (std::size_t g = 0; g < p.images[k].gt_triplets.size(); ++g) {
      after.push_back(p.images[k].gt_triplets[g].hoi_class);
      changed |= p.images[k].gt_triplets[g].hoi_class != w.images[k].gt_triplets[g].hoi_class;
      CHECK(p.images[k].gt_triplets[g].human == w.images[k].gt_triplets[g].human);
    }
    std::set<int> labels;
    for (const GtTriplet& t : p.images[k].gt_triplets) labels.insert(t.hoi_class);
    CHECK(std::vector<int>(labels.begin(), labels.end()) == p.images[k].image_labels);
  }
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  CHECK(before == after);
  CHECK(changed);
}

}
