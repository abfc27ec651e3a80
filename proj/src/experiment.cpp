#include "mxhoi/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "mxhoi/batching.hpp"
#include "mxhoi/io.hpp"
#include "mxhoi/loss.hpp"

namespace mxhoi {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

enum Salt : std::uint64_t { kInitSalt = 11, kScheduleSalt = 12, kSplitSalt = 13, kClassSplitSalt = 14 };

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

bool trainable(const SynthImage& img) {
  switch (img.supervision) {
    case SupervisionTag::FS: return true;
    case SupervisionTag::WS: return true;
    case SupervisionTag::US: return !img.gt_triplets.empty();
  }
  return false;
}

Eigen::MatrixXd stack_features(const std::vector<HumanObjectPair>& pairs) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(pairs.size()), pairs.front().features.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = pairs[i].features.transpose();
  return x;
}

struct CachedImage {
  std::vector<HumanObjectPair> pairs;
  Eigen::MatrixXd fs_targets;  // empty unless region-level
};

struct RunningMean {
  double sum = 0.0;
  long n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double mean() const { return n > 0 ? sum / static_cast<double>(n) : std::nan(""); }
};

}  // namespace

// --- SupervisionRatio ------------------------------------------------------

std::string SupervisionRatio::label() const {
  return format("%ld/%ld/%ld", std::lround(ws * 100.0), std::lround(fs * 100.0), std::lround(us * 100.0));
}

SupervisionRatio SupervisionRatio::parse(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, '/')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad supervision ratio '" + text + "'");
    }
  }
  if (parts.size() < 2 || parts.size() > 3)
    throw std::invalid_argument("supervision ratio '" + text + "' must be WS/FS or WS/FS/US");
  if (parts[0] < 0 || parts[1] < 0 || (parts.size() == 3 && parts[2] < 0))
    throw std::invalid_argument("supervision ratio '" + text + "' must be nonnegative");
  // WS/FS may leave a remainder, which stays unlabeled
  if (parts.size() == 2) parts.push_back(std::max(0.0, 100.0 - parts[0] - parts[1]));
  const double total = parts[0] + parts[1] + parts[2];
  if (std::abs(total - 100.0) > 1e-6)
    throw std::invalid_argument("supervision ratio '" + text + "' must not exceed 100, and WS/FS/US must sum to 100");
  return {parts[0] / 100.0, parts[1] / 100.0, parts[2] / 100.0};
}

// --- ExperimentConfig --------------------------------------------------------

long ExperimentConfig::eval_cadence() const {
  if (eval_every == 0) return 0;
  if (eval_every > 0) return eval_every;
  return std::max(iterations / 10, 200L);
}

void ExperimentConfig::validate() const {
  world.validate();
  optimizer.validate();
  if (hidden_dim < 1) throw std::invalid_argument("hidden_dim must be >= 1");
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  if (n_test_images < 1) throw std::invalid_argument("n_test_images must be >= 1");
  if (!(pseudo_threshold > 0.0 && pseudo_threshold < 1.0))
    throw std::invalid_argument("pseudo_threshold must lie in (0, 1)");
  if (n_cycles < 1) throw std::invalid_argument("n_cycles must be >= 1");
}

// --- training ----------------------------------------------------------------

TrainResult train(const World& train_world, const ExperimentConfig& cfg, const World* eval_world,
                  const std::vector<int>& rare_class_ids) {
  ModelParamsd params = ModelParamsd::init(train_world.config.feature_dim, cfg.hidden_dim,
                                           train_world.n_hoi_classes(), derive_seed(cfg.seed, kInitSalt));
  MomentumState<double> momentum = MomentumState<double>::zeros_like(params);
  return train_from(train_world, cfg, std::move(params), std::move(momentum), 0, eval_world, rare_class_ids);
}

TrainResult train_from(const World& train_world, const ExperimentConfig& cfg, ModelParamsd params,
                       MomentumState<double> momentum, long start_iteration, const World* eval_world,
                       const std::vector<int>& rare_class_ids) {
  cfg.validate();
  const int n_classes = train_world.n_hoi_classes();

  World pool;
  pool.config = train_world.config;
  pool.hoi_classes = train_world.hoi_classes;
  for (const SynthImage& img : train_world.images)
    if (trainable(img)) pool.images.push_back(img);

  TrainResult result;
  std::vector<std::string>& log = result.log;
  log.push_back("# run " + cfg.run_id);
  log.push_back("# config " + to_json(cfg).dump());
  log.push_back("# iteration accounting: one schedule entry (a two-image batch) = one iteration");
  log.push_back(format("# trainable images %zu of %zu", pool.images.size(), train_world.images.size()));

  if (cfg.iterations == 0 || start_iteration >= cfg.iterations) {
    result.params = std::move(params);
    result.momentum = std::move(momentum);
    return result;
  }

  const Schedule schedule = batch_schedule(pool, derive_seed(cfg.seed, kScheduleSalt), cfg.iterations);
  for (const auto& [tag, n] : schedule.leftover_per_epoch)
    log.push_back(format("# schedule %s: %d image(s) left over per epoch", std::string(to_string(tag)).c_str(), n));
  for (SupervisionTag tag : schedule.unbatchable)
    log.push_back(format("# schedule %s: single image, no batch possible", std::string(to_string(tag)).c_str()));
  log.push_back(format("# schedule %d batches per epoch, %d epochs", schedule.batches_per_epoch, schedule.epochs));

  std::vector<std::optional<CachedImage>> cache(pool.images.size());
  std::map<int, std::size_t> position;
  for (std::size_t k = 0; k < pool.images.size(); ++k) position[pool.images[k].image_id] = k;
  auto cached = [&](int image_id) -> const CachedImage& {
    const std::size_t k = position.at(image_id);
    if (!cache[k]) {
      const SynthImage& img = pool.images[k];
      CachedImage c;
      c.pairs = build_pairs(img, train_world.features, cfg.top_k);
      if (img.supervision != SupervisionTag::WS)
        c.fs_targets = make_fs_targets(c.pairs, img.gt_triplets, n_classes, cfg.iou_threshold);
      cache[k] = std::move(c);
    }
    return *cache[k];
  };

  const long cadence = cfg.eval_cadence();
  const long log_every = std::max(1L, cfg.iterations / 20);
  const long tail_start = cfg.iterations - std::max(1L, cfg.iterations / 10);
  RunningMean window_ws, window_fs, tail_ws, tail_fs;

  for (long it = start_iteration; it < cfg.iterations; ++it) {
    const ScheduledBatch& sb = schedule.batches[static_cast<std::size_t>(it)];
    if (schedule_filter(sb.supervision, it, cfg.optimizer, cfg.iterations) == ScheduleDecision::Skip) {
      ++result.skipped_batches;
    } else {
      ++result.accepted_batches;
      const CachedImage& a = cached(sb.first_image);
      const CachedImage& b = cached(sb.second_image);
      double loss = 0.0;
      ModelParamsd grads;
      if (sb.supervision == SupervisionTag::WS) {
        std::vector<HumanObjectPair> pairs;
        if (cfg.hes && sb.element_swap) {
          pairs = element_swap(a.pairs, b.pairs, train_world.features);
        } else {
          pairs = a.pairs;
          pairs.insert(pairs.end(), b.pairs.begin(), b.pairs.end());
        }
        const Eigen::MatrixXd x = stack_features(pairs);
        const Eigen::VectorXd y = make_ws_targets(pool.images[position.at(sb.first_image)].image_labels,
                                                  pool.images[position.at(sb.second_image)].image_labels,
                                                  n_classes);
        const ForwardPass<double> fp = forward_pass(params, x);
        const ImageLoss<double> l = ws_loss<double>(aggregate_image_level(fp.scores.P), y);
        loss = l.report.value;
        grads = backward_image_level(params, x, fp, l.grad);
      } else {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(a.pairs.size() + b.pairs.size()), train_world.features.dim());
        x << stack_features(a.pairs), stack_features(b.pairs);
        Eigen::MatrixXd y(x.rows(), n_classes);
        y << a.fs_targets, b.fs_targets;
        const ForwardPass<double> fp = forward_pass(params, x);
        const RegionLoss<double> l = fs_loss<double>(fp.scores.P, y, cfg.fs_average_over_classes);
        loss = l.report.value;
        grads = backward(params, x, fp, l.grad);
      }
      if (!std::isfinite(loss)) throw TrainingAborted(it, "non-finite loss");
      step(params, grads, sb.supervision, momentum, cfg.optimizer, sb.supervision == SupervisionTag::US);
      if (!params.all_finite()) throw TrainingAborted(it, "non-finite parameters");

      const bool weak = sb.supervision == SupervisionTag::WS;
      (weak ? window_ws : window_fs).add(loss);
      if (it >= tail_start) (weak ? tail_ws : tail_fs).add(loss);
    }

    if ((it + 1) % log_every == 0 || it + 1 == cfg.iterations) {
      log.push_back(format("iter=%ld loss_ws=%.6f loss_fs=%.6f accepted=%ld skipped=%ld", it + 1,
                           window_ws.mean(), window_fs.mean(), result.accepted_batches,
                           result.skipped_batches));
      window_ws = {};
      window_fs = {};
    }
    if (eval_world && cadence > 0 && (it + 1) % cadence == 0) {
      const EvalReport r = evaluate(params, *eval_world, rare_class_ids, cfg.top_k);
      log.push_back(format("eval iter=%ld map_full=%.6f map_rare=%.6f map_nonrare=%.6f", it + 1, r.map_full,
                           r.map_rare, r.map_nonrare));
    }
  }

  result.final_loss_ws = tail_ws.mean();
  result.final_loss_fs = tail_fs.mean();
  result.params = std::move(params);
  result.momentum = std::move(momentum);
  return result;
}

// --- runs --------------------------------------------------------------------

World make_test_world(const ExperimentConfig& cfg) {
  WorldConfig t = cfg.world;
  t.n_images = cfg.n_test_images;
  t.stream = 1;
  return generate_world(t);
}

RunResult run_on_world(const World& train_world, const World& test_world,
                       const std::vector<int>& rare_class_ids, const ExperimentConfig& cfg) {
  const World tagged = split_supervision(train_world, cfg.ratio.ws, cfg.ratio.fs, cfg.ratio.us,
                                         derive_seed(cfg.seed, kSplitSalt));
  RunResult run;
  run.config = cfg;
  run.training = train(tagged, cfg, &test_world, rare_class_ids);
  run.report = evaluate(run.training.params, test_world, rare_class_ids, cfg.top_k);
  run.training.log.push_back(format("final map_full=%.6f map_rare=%.6f map_nonrare=%.6f", run.report.map_full,
                                    run.report.map_rare, run.report.map_nonrare));
  return run;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const World world = generate_world(cfg.world);
  const World test = make_test_world(cfg);
  return run_on_world(world, test, rare_classes(world), cfg);
}

std::string csv_header() { return "run_id,ws_fs_us,policy,hes,seed,map_full,map_rare,map_nonrare"; }

std::string csv_row(const ExperimentConfig& cfg, const EvalReport& report) {
  return format("%s,%s,%s,%s,%llu,%.6f,%.6f,%.6f", cfg.run_id.c_str(), cfg.ratio.label().c_str(),
                std::string(to_string(cfg.optimizer.policy)).c_str(), cfg.hes ? "on" : "off",
                static_cast<unsigned long long>(cfg.seed), report.map_full, report.map_rare, report.map_nonrare);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& values) {
  std::vector<double> v;
  for (double x : values)
    if (std::isfinite(x)) v.push_back(x);
  if (v.empty()) return {std::nan(""), std::nan("")};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

std::string sweep_summary_header() {
  return "ws_fs_us,n_seeds,mean_map_full,std_map_full,mean_map_rare,std_map_rare,mean_map_nonrare,std_map_nonrare";
}

std::string sweep_summary_row(const SweepCell& c) {
  return format("%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", c.ratio.label().c_str(), c.n_seeds, c.mean_full,
                c.std_full, c.mean_rare, c.std_rare, c.mean_nonrare, c.std_nonrare);
}

SweepResult run_ratio_sweep(const ExperimentConfig& base, const std::vector<SupervisionRatio>& ratios,
                            const std::vector<std::uint64_t>& seeds, const RunObserver& observer) {
  if (seeds.empty()) throw std::invalid_argument("run_ratio_sweep: need at least one seed");
  SweepResult out;
  for (const SupervisionRatio& ratio : ratios) {
    SweepCell cell;
    cell.ratio = ratio;
    std::vector<double> rare, nonrare;
    for (std::uint64_t seed : seeds) {
      ExperimentConfig cfg = base;
      cfg.ratio = ratio;
      cfg.seed = seed;
      cfg.world.seed = seed;
      cfg.run_id = base.run_id + "-" + ratio.label() + "-s" + std::to_string(seed);
      const RunResult run = run_experiment(cfg);
      if (observer) observer(run);
      out.rows.push_back(csv_row(cfg, run.report));
      cell.map_full.push_back(run.report.map_full);
      rare.push_back(run.report.map_rare);
      nonrare.push_back(run.report.map_nonrare);
    }
    cell.n_seeds = static_cast<int>(seeds.size());
    std::tie(cell.mean_full, cell.std_full) = mean_std(cell.map_full);
    std::tie(cell.mean_rare, cell.std_rare) = mean_std(rare);
    std::tie(cell.mean_nonrare, cell.std_nonrare) = mean_std(nonrare);
    out.cells.push_back(std::move(cell));
  }
  return out;
}

// --- class split ---------------------------------------------------------------

World class_split_world(const World& world, const std::vector<int>& fs_classes, std::size_t* dropped) {
  const std::set<int> fs_set(fs_classes.begin(), fs_classes.end());
  World out = world;
  out.images.clear();
  std::size_t n_dropped = 0;
  for (SynthImage img : world.images) {
    bool any_fs = false;
    bool any_ws = false;
    for (const GtTriplet& t : img.gt_triplets) (fs_set.count(t.hoi_class) ? any_fs : any_ws) = true;
    if (any_fs == any_ws) {  // spans both halves, or carries no interaction
      ++n_dropped;
      continue;
    }
    apply_supervision(img, any_fs ? SupervisionTag::FS : SupervisionTag::WS);
    out.images.push_back(std::move(img));
  }
  if (dropped) *dropped = n_dropped;
  return out;
}

ClassSplitResult run_class_split(const World& train_world, const World& test_world,
                                 const ExperimentConfig& cfg) {
  const int n_classes = train_world.n_hoi_classes();
  if (n_classes < 2) throw std::invalid_argument("class split needs at least two HOI classes");

  ClassSplitResult r;
  std::vector<int> classes(n_classes);
  std::iota(classes.begin(), classes.end(), 0);
  std::mt19937_64 rng(derive_seed(cfg.seed, kClassSplitSalt));
  std::shuffle(classes.begin(), classes.end(), rng);
  r.fs_classes.assign(classes.begin(), classes.begin() + n_classes / 2);
  r.ws_classes.assign(classes.begin() + n_classes / 2, classes.end());
  std::sort(r.fs_classes.begin(), r.fs_classes.end());
  std::sort(r.ws_classes.begin(), r.ws_classes.end());

  const std::vector<int> rare = rare_classes(train_world);
  const World joint = class_split_world(train_world, r.fs_classes, &r.dropped_images);
  auto only = [&joint](SupervisionTag tag) {
    World w = joint;
    std::erase_if(w.images, [tag](const SynthImage& img) { return img.supervision != tag; });
    return w;
  };

  ExperimentConfig c = cfg;
  c.eval_every = 0;
  c.run_id = cfg.run_id + "-separate-fs";
  r.separate_fs_report = evaluate(train(only(SupervisionTag::FS), c).params, test_world, rare, cfg.top_k);
  c.run_id = cfg.run_id + "-separate-ws";
  r.separate_ws_report = evaluate(train(only(SupervisionTag::WS), c).params, test_world, rare, cfg.top_k);
  c.run_id = cfg.run_id + "-joint";
  r.joint_report = evaluate(train(joint, c).params, test_world, rare, cfg.top_k);

  r.separate_fs_map = subset_map(r.separate_fs_report, r.fs_classes);
  r.separate_ws_map = subset_map(r.separate_ws_report, r.ws_classes);
  r.joint_fs_map = subset_map(r.joint_report, r.fs_classes);
  r.joint_ws_map = subset_map(r.joint_report, r.ws_classes);
  return r;
}

World permute_hoi_labels(const World& world, std::uint64_t seed) {
  std::vector<int> classes;
  for (const SynthImage& img : world.images)
    for (const GtTriplet& t : img.gt_triplets) classes.push_back(t.hoi_class);
  std::mt19937_64 rng(seed);
  std::shuffle(classes.begin(), classes.end(), rng);
  World out = world;
  std::size_t k = 0;
  for (SynthImage& img : out.images) {
    img.image_labels.clear();
    for (GtTriplet& t : img.gt_triplets) {
      t.hoi_class = classes[k++];
      img.image_labels.push_back(t.hoi_class);
    }
    std::sort(img.image_labels.begin(), img.image_labels.end());
    img.image_labels.erase(std::unique(img.image_labels.begin(), img.image_labels.end()), img.image_labels.end());
  }
  return out;
}

}  // namespace mxhoi
