#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mxhoi/evaluation.hpp"
#include "mxhoi/model.hpp"
#include "mxhoi/optimizer.hpp"
#include "mxhoi/synth_world.hpp"

namespace mxhoi {

struct SupervisionRatio {
  double ws = 0.7;
  double fs = 0.3;
  double us = 0.0;

  /// "70/30" or "30/40/30" style label, in percent.
  std::string label() const;
  /// Parses "WS/FS" (at most 100, the remainder unlabeled) or "WS/FS/US" (exactly 100) percentages.
  static SupervisionRatio parse(const std::string& text);
};

struct ExperimentConfig {
  std::string run_id = "run";
  WorldConfig world;
  int n_test_images = 300;
  // desk-scale step sizes; each tuned on a single-supervision run
  OptimizerConfig optimizer{.alpha_ws = 3e-3, .alpha_fs = 3e-2};
  int hidden_dim = 64;
  long iterations = 3000;
  bool hes = true;
  SupervisionRatio ratio;
  int top_k = 30;
  double iou_threshold = 0.5;
  std::uint64_t seed = 1;  // model init, supervision split and batch schedule
  // evaluation cadence during training; 0 disables, negative means max(iterations / 10, 200)
  long eval_every = -1;
  bool fs_average_over_classes = false;
  int n_cycles = 3;
  double pseudo_threshold = 0.5;

  long eval_cadence() const;
  void validate() const;
};

class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(long iteration, const std::string& what)
      : std::runtime_error("training aborted at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

struct TrainResult {
  ModelParamsd params;
  MomentumState<double> momentum;
  std::vector<std::string> log;  // line-oriented run log
  long accepted_batches = 0;
  long skipped_batches = 0;
  double final_loss_ws = 0.0;  // running mean over the last 10% of WS batches
  double final_loss_fs = 0.0;
};

// Trains on every image of `train_world` that can carry a loss: FS images,
// WS images, and US images that hold pseudo triplets (other US images are
// left out). `eval_world` (optional) drives periodic evaluation.
TrainResult train(const World& train_world, const ExperimentConfig& cfg,
                  const World* eval_world = nullptr, const std::vector<int>& rare_class_ids = {});

/// Continue training from given parameters and momentum (checkpoint resume).
TrainResult train_from(const World& train_world, const ExperimentConfig& cfg, ModelParamsd params,
                       MomentumState<double> momentum, long start_iteration,
                       const World* eval_world = nullptr,
                       const std::vector<int>& rare_class_ids = {});

/// The held-out test world paired with cfg.world (same class structure, stream 1).
World make_test_world(const ExperimentConfig& cfg);

struct RunResult {
  ExperimentConfig config;
  EvalReport report;
  TrainResult training;
};

/// Generate worlds, split by cfg.ratio, train and evaluate.
RunResult run_experiment(const ExperimentConfig& cfg);

/// Same, on an already-generated training world (tags assigned here).
RunResult run_on_world(const World& train_world, const World& test_world,
                       const std::vector<int>& rare_class_ids, const ExperimentConfig& cfg);

/// CSV row: run_id,ws_fs_us,policy,hes,seed,map_full,map_rare,map_nonrare
std::string csv_header();
std::string csv_row(const ExperimentConfig& cfg, const EvalReport& report);

struct SweepCell {
  SupervisionRatio ratio;
  int n_seeds = 0;
  double mean_full = 0.0, std_full = 0.0;
  double mean_rare = 0.0, std_rare = 0.0;
  double mean_nonrare = 0.0, std_nonrare = 0.0;
  std::vector<double> map_full;  // one per seed
};

struct SweepResult {
  std::vector<std::string> rows;  // csv_row per (ratio, seed)
  std::vector<SweepCell> cells;
};

std::string sweep_summary_header();
std::string sweep_summary_row(const SweepCell& cell);

using RunObserver = std::function<void(const RunResult&)>;

/// One train + evaluate per (ratio, seed); seeds replace both world and training seeds.
SweepResult run_ratio_sweep(const ExperimentConfig& base, const std::vector<SupervisionRatio>& ratios,
                            const std::vector<std::uint64_t>& seeds, const RunObserver& observer = {});

struct ClassSplitResult {
  std::vector<int> fs_classes;
  std::vector<int> ws_classes;
  double separate_fs_map = 0.0;  // FS-only model on the FS half
  double separate_ws_map = 0.0;  // WS-only model on the WS half
  double joint_fs_map = 0.0;     // joint model on the FS half
  double joint_ws_map = 0.0;     // joint model on the WS half
  EvalReport separate_fs_report;
  EvalReport separate_ws_report;
  EvalReport joint_report;
  std::size_t dropped_images = 0;  // images with classes from both halves
};

/// Tag images by class half: all-FS-half images are FS, all-WS-half images are WS,
/// images spanning both halves are dropped. Returns the tagged world.
World class_split_world(const World& world, const std::vector<int>& fs_classes,
                        std::size_t* dropped = nullptr);

ClassSplitResult run_class_split(const World& train_world, const World& test_world,
                                 const ExperimentConfig& cfg);

/// Label-permutation control: HOI classes of gt triplets shuffled across the
/// whole world, image labels rebuilt to match.
World permute_hoi_labels(const World& world, std::uint64_t seed);

}  // namespace mxhoi
