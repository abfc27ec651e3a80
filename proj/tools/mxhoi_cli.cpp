// Command-line driver for synthetic mixed-supervision HOI experiments.
//
//   mxhoi gen-world   --config cfg.json --seed 3 --out-dir out/
//   mxhoi train       --config cfg.json --seed 3 --out-dir out/
//   mxhoi eval        --config cfg.json --checkpoint out/checkpoint.bin --out-dir out/
//   mxhoi sweep       --config cfg.json --ratios 100/0,70/30 --seeds 1,2,3 --out-dir out/
//   mxhoi class-split --config cfg.json --seed 3 --out-dir out/
//   mxhoi pseudo-cycle --config cfg.json --mode unlabeled --cycles 3 --out-dir out/

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mxhoi/batching.hpp"
#include "mxhoi/experiment.hpp"
#include "mxhoi/io.hpp"
#include "mxhoi/pseudo_label.hpp"

namespace fs = std::filesystem;
using namespace mxhoi;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON config (world, optimizer and experiment fields)");
  cmd->add_option("--seed", o.seed, "Seed for world generation and training");
  cmd->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_experiment_config(o.config_path);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.world.seed = *o.seed;
  }
  cfg.validate();
  fs::create_directories(o.out_dir);
  return cfg;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const std::string& l : lines) out << l << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_gen_world(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve_config(o);
  const World train = generate_world(cfg.world);
  const World test = make_test_world(cfg);
  save_world(train, fs::path(o.out_dir) / "train");
  save_world(test, fs::path(o.out_dir) / "test");
  std::cout << "wrote " << train.images.size() << " training and " << test.images.size()
            << " test images to " << o.out_dir << "\n";
  return 0;
}

int cmd_train(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve_config(o);
  const RunResult run = run_experiment(cfg);
  const fs::path dir(o.out_dir);
  write_lines(dir / "run.log", run.training.log);
  write_lines(dir / "metrics.csv", {csv_header(), csv_row(cfg, run.report)});
  write_text(dir / "eval.json", to_json(run.report).dump(2) + "\n");
  save_checkpoint({run.training.params, run.training.momentum, cfg.iterations, to_json(cfg)},
                  dir / "checkpoint.bin");
  std::cout << csv_row(cfg, run.report) << "\n";
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  ExperimentConfig cfg = o.config_path.empty() ? experiment_config_from_json(ckpt.config)
                                               : load_experiment_config(o.config_path);
  if (o.seed) cfg.world.seed = *o.seed;
  cfg.validate();
  fs::create_directories(o.out_dir);
  const World train = generate_world(cfg.world);
  const World test = make_test_world(cfg);
  const EvalReport report = evaluate(ckpt.params, test, rare_classes(train), cfg.top_k);
  const fs::path dir(o.out_dir);
  write_text(dir / "eval.json", to_json(report).dump(2) + "\n");
  write_lines(dir / "metrics.csv", {csv_header(), csv_row(cfg, report)});
  std::cout << csv_row(cfg, report) << "\n";
  return 0;
}

int cmd_sweep(const CommonOptions& o, const std::string& ratios_text, const std::string& seeds_text) {
  const ExperimentConfig cfg = resolve_config(o);
  std::vector<SupervisionRatio> ratios;
  for (const std::string& r : split_list(ratios_text)) ratios.push_back(SupervisionRatio::parse(r));
  std::vector<std::uint64_t> seeds;
  for (const std::string& s : split_list(seeds_text)) seeds.push_back(std::stoull(s));

  const fs::path dir(o.out_dir);
  std::ofstream log(dir / "run.log");
  const SweepResult sweep = run_ratio_sweep(cfg, ratios, seeds, [&](const RunResult& run) {
    for (const std::string& l : run.training.log) log << l << '\n';
    std::cout << csv_row(run.config, run.report) << std::endl;
  });
  std::vector<std::string> rows{csv_header()};
  rows.insert(rows.end(), sweep.rows.begin(), sweep.rows.end());
  write_lines(dir / "metrics.csv", rows);
  std::vector<std::string> summary{sweep_summary_header()};
  for (const SweepCell& c : sweep.cells) summary.push_back(sweep_summary_row(c));
  write_lines(dir / "summary.csv", summary);
  for (const std::string& l : summary) std::cout << l << "\n";
  return 0;
}

int cmd_class_split(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve_config(o);
  const World train = generate_world(cfg.world);
  const World test = make_test_world(cfg);
  const ClassSplitResult r = run_class_split(train, test, cfg);
  const Json out = {{"fs_classes", r.fs_classes},
                    {"ws_classes", r.ws_classes},
                    {"dropped_images", r.dropped_images},
                    {"separate", {{"fs_half_map", r.separate_fs_map}, {"ws_half_map", r.separate_ws_map}}},
                    {"joint", {{"fs_half_map", r.joint_fs_map}, {"ws_half_map", r.joint_ws_map}}}};
  write_text(fs::path(o.out_dir) / "class_split.json", out.dump(2) + "\n");
  write_lines(fs::path(o.out_dir) / "metrics.csv",
              {"run_id,model,fs_half_map,ws_half_map",
               cfg.run_id + ",separate," + std::to_string(r.separate_fs_map) + "," + std::to_string(r.separate_ws_map),
               cfg.run_id + ",joint," + std::to_string(r.joint_fs_map) + "," + std::to_string(r.joint_ws_map)});
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_pseudo_cycle(const CommonOptions& o, const std::string& mode_text, std::optional<int> cycles) {
  ExperimentConfig cfg = resolve_config(o);
  PseudoMode mode;
  if (mode_text == "unlabeled") {
    mode = PseudoMode::Unlabeled;
  } else if (mode_text == "multi-stage") {
    mode = PseudoMode::MultiStage;
  } else {
    throw std::invalid_argument("--mode must be 'unlabeled' or 'multi-stage'");
  }
  if (cycles) cfg.n_cycles = *cycles;
  const World train = generate_world(cfg.world);
  const World test = make_test_world(cfg);
  const std::vector<int> rare = rare_classes(train);
  const World tagged = split_supervision(train, cfg.ratio.ws, cfg.ratio.fs, cfg.ratio.us, cfg.seed);
  const CycleResult r = iterate_cycles(tagged, test, rare, cfg, mode, cfg.n_cycles);

  const fs::path dir(o.out_dir);
  write_lines(dir / "run.log", r.log);
  std::vector<std::string> rows{"run_id,cycle,ws_fs_us,pseudo_images,pseudo_triplets,map_full,map_rare,map_nonrare"};
  for (const CycleReport& c : r.cycles) {
    std::ostringstream row;
    row << cfg.run_id << ',' << c.cycle << ',' << cfg.ratio.label() << ',' << c.trained_pseudo_images << ','
        << c.trained_pseudo_triplets << ',' << c.report.map_full << ',' << c.report.map_rare << ','
        << c.report.map_nonrare;
    rows.push_back(row.str());
  }
  write_lines(dir / "metrics.csv", rows);
  save_pseudo_labels(r.pseudo_labels, tagged.images, dir / "pseudo_labels.jsonl");
  for (const std::string& l : rows) std::cout << l << "\n";
  if (r.converged_early) std::cout << "pseudo labels reached a fixed point\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-supervision HOI detection experiments on a synthetic detection world"};
  app.require_subcommand(1);

  CommonOptions common;
  auto* gen = app.add_subcommand("gen-world", "Generate and save training and test worlds");
  add_common(gen, common);

  auto* train = app.add_subcommand("train", "Train one configuration and evaluate it");
  add_common(train, common);

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test world");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  std::string ratios = "100/0,80/20,70/30,50/50,30/70,20/80,0/100";
  std::string seeds = "1";
  auto* sweep = app.add_subcommand("sweep", "WS/FS ratio sweep over seeds");
  add_common(sweep, common);
  sweep->add_option("--ratios", ratios, "Comma-separated WS/FS[/US] percentages")->capture_default_str();
  sweep->add_option("--seeds", seeds, "Comma-separated seeds")->capture_default_str();

  auto* split = app.add_subcommand("class-split", "Separate vs joint training on a 50/50 class split");
  add_common(split, common);

  std::string mode = "unlabeled";
  std::optional<int> cycles;
  auto* pseudo = app.add_subcommand("pseudo-cycle", "Iterative pseudo-labeling cycles");
  add_common(pseudo, common);
  pseudo->add_option("--mode", mode, "unlabeled | multi-stage")->capture_default_str();
  pseudo->add_option("--cycles", cycles, "Number of cycles (overrides n_cycles)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_world(common);
    if (*train) return cmd_train(common);
    if (*eval) return cmd_eval(common, checkpoint);
    if (*sweep) return cmd_sweep(common, ratios, seeds);
    if (*split) return cmd_class_split(common);
    if (*pseudo) return cmd_pseudo_cycle(common, mode, cycles);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
