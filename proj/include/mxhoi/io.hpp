#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mxhoi/evaluation.hpp"
#include "mxhoi/experiment.hpp"
#include "mxhoi/optimizer.hpp"
#include "mxhoi/synth_world.hpp"

namespace mxhoi {

using Json = nlohmann::json;

// --- configs ---------------------------------------------------------------
// Missing keys keep their defaults; unknown keys are rejected.

Json to_json(const WorldConfig& cfg);
Json to_json(const OptimizerConfig& cfg);
Json to_json(const ExperimentConfig& cfg);
WorldConfig world_config_from_json(const Json& j, WorldConfig base = {});
OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig base = {});
ExperimentConfig experiment_config_from_json(const Json& j, ExperimentConfig base = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Dotted paths of leaves that differ between two configs ("optimizer.policy").
std::vector<std::string> config_diff(const Json& a, const Json& b);

// --- dataset records ------------------------------------------------------
// One JSON object per line:
//   {"image_id", "supervision", "detections": [{"box", "class_id", "confidence"}],
//    "gt_triplets": [{"h_box", "o_box", "hoi_class"}], "image_labels": [...]}
// Boxes are [x_min, y_min, x_max, y_max].

Json image_to_json(const SynthImage& image);
SynthImage image_from_json(const Json& j);

/// Writes `world_config.json` and `images.jsonl` into `dir`.
void save_world(const World& world, const std::filesystem::path& dir);
World load_world(const std::filesystem::path& dir);

/// Pseudo-label audit dump: gt_triplets records flagged "pseudo": true.
void save_pseudo_labels(const std::map<int, std::vector<GtTriplet>>& labels,
                        const std::vector<SynthImage>& images, const std::filesystem::path& path);

// --- evaluation ------------------------------------------------------------

Json to_json(const EvalReport& report);

// --- checkpoints -------------------------------------------------------------
// Binary layout: 8-byte magic "MXHOICKP", u32 version, u64 header length,
// JSON header (config, seed, iteration, tensor names and shapes), then every
// tensor as raw little-endian IEEE-754 doubles in column-major order.

struct Checkpoint {
  ModelParamsd params;
  MomentumState<double> momentum;
  long iteration = 0;
  Json config;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mxhoi
