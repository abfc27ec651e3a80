#include "mxhoi/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mxhoi {

namespace fs = std::filesystem;

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const char* section) {
  if (!j.is_object()) throw std::invalid_argument(std::string(section) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key))
      throw std::invalid_argument(std::string(section) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json box_to_json(const Box& b) { return Json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

Box box_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x_min, y_min, x_max, y_max]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

Json triplet_to_json(const GtTriplet& t) {
  return {{"h_box", box_to_json(t.human)}, {"o_box", box_to_json(t.object)}, {"hoi_class", t.hoi_class}};
}

GtTriplet triplet_from_json(const Json& j) {
  return {box_from_json(j.at("h_box")), box_from_json(j.at("o_box")), j.at("hoi_class").get<int>()};
}

Json nan_as_null(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }

void flatten(const Json& j, const std::string& prefix, std::map<std::string, Json>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else {
    out[prefix] = j;
  }
}

constexpr char kMagic[8] = {'M', 'X', 'H', 'O', 'I', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian host");

}  // namespace

// --- configs ---------------------------------------------------------------

Json to_json(const WorldConfig& c) {
  return {{"n_object_classes", c.n_object_classes},
          {"n_verb_classes", c.n_verb_classes},
          {"n_hoi_classes", c.n_hoi_classes},
          {"n_images", c.n_images},
          {"humans_per_image", {c.humans_per_image.lo, c.humans_per_image.hi}},
          {"objects_per_image", {c.objects_per_image.lo, c.objects_per_image.hi}},
          {"feature_dim", c.feature_dim},
          {"feature_noise_sigma", c.feature_noise_sigma},
          {"detection_jitter_sigma", c.detection_jitter_sigma},
          {"rare_class_fraction", c.rare_class_fraction},
          {"distractor_ratio", c.distractor_ratio},
          {"layout_noise_sigma", c.layout_noise_sigma},
          {"seed", c.seed},
          {"stream", c.stream}};
}

WorldConfig world_config_from_json(const Json& j, WorldConfig c) {
  reject_unknown(j,
                 {"n_object_classes", "n_verb_classes", "n_hoi_classes", "n_images", "humans_per_image",
                  "objects_per_image", "feature_dim", "feature_noise_sigma", "detection_jitter_sigma",
                  "rare_class_fraction", "distractor_ratio", "layout_noise_sigma", "seed", "stream"},
                 "world");
  read_if(j, "n_object_classes", c.n_object_classes);
  read_if(j, "n_verb_classes", c.n_verb_classes);
  read_if(j, "n_hoi_classes", c.n_hoi_classes);
  read_if(j, "n_images", c.n_images);
  for (auto [key, range] : {std::pair{"humans_per_image", &c.humans_per_image},
                            std::pair{"objects_per_image", &c.objects_per_image}}) {
    if (!j.contains(key)) continue;
    const Json& r = j.at(key);
    if (!r.is_array() || r.size() != 2) throw std::invalid_argument(std::string("world.") + key + ": expected [lo, hi]");
    *range = {r[0].get<int>(), r[1].get<int>()};
  }
  read_if(j, "feature_dim", c.feature_dim);
  read_if(j, "feature_noise_sigma", c.feature_noise_sigma);
  read_if(j, "detection_jitter_sigma", c.detection_jitter_sigma);
  read_if(j, "rare_class_fraction", c.rare_class_fraction);
  read_if(j, "distractor_ratio", c.distractor_ratio);
  read_if(j, "layout_noise_sigma", c.layout_noise_sigma);
  read_if(j, "seed", c.seed);
  read_if(j, "stream", c.stream);
  return c;
}

Json to_json(const OptimizerConfig& c) {
  return {{"alpha_ws", c.alpha_ws},
          {"alpha_fs", c.alpha_fs},
          {"beta", c.beta},
          {"policy", std::string(to_string(c.policy))},
          {"sequence_switch_iteration", c.sequence_switch_iteration}};
}

OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig c) {
  reject_unknown(j, {"alpha_ws", "alpha_fs", "beta", "policy", "sequence_switch_iteration"}, "optimizer");
  read_if(j, "alpha_ws", c.alpha_ws);
  read_if(j, "alpha_fs", c.alpha_fs);
  read_if(j, "beta", c.beta);
  if (j.contains("policy")) c.policy = parse_policy(j.at("policy").get<std::string>());
  read_if(j, "sequence_switch_iteration", c.sequence_switch_iteration);
  return c;
}

Json to_json(const ExperimentConfig& c) {
  return {{"run_id", c.run_id},
          {"world", to_json(c.world)},
          {"n_test_images", c.n_test_images},
          {"optimizer", to_json(c.optimizer)},
          {"hidden_dim", c.hidden_dim},
          {"iterations", c.iterations},
          {"hes", c.hes},
          {"ratio", c.ratio.label()},
          {"top_k", c.top_k},
          {"iou_threshold", c.iou_threshold},
          {"seed", c.seed},
          {"eval_every", c.eval_every},
          {"fs_average_over_classes", c.fs_average_over_classes},
          {"n_cycles", c.n_cycles},
          {"pseudo_threshold", c.pseudo_threshold}};
}

ExperimentConfig experiment_config_from_json(const Json& j, ExperimentConfig c) {
  reject_unknown(j,
                 {"run_id", "world", "n_test_images", "optimizer", "hidden_dim", "iterations", "hes",
                  "ratio", "top_k", "iou_threshold", "seed", "eval_every", "fs_average_over_classes",
                  "n_cycles", "pseudo_threshold"},
                 "experiment");
  read_if(j, "run_id", c.run_id);
  if (j.contains("world")) c.world = world_config_from_json(j.at("world"), c.world);
  read_if(j, "n_test_images", c.n_test_images);
  if (j.contains("optimizer")) c.optimizer = optimizer_config_from_json(j.at("optimizer"), c.optimizer);
  read_if(j, "hidden_dim", c.hidden_dim);
  read_if(j, "iterations", c.iterations);
  read_if(j, "hes", c.hes);
  if (j.contains("ratio")) c.ratio = SupervisionRatio::parse(j.at("ratio").get<std::string>());
  read_if(j, "top_k", c.top_k);
  read_if(j, "iou_threshold", c.iou_threshold);
  read_if(j, "seed", c.seed);
  read_if(j, "eval_every", c.eval_every);
  read_if(j, "fs_average_over_classes", c.fs_average_over_classes);
  read_if(j, "n_cycles", c.n_cycles);
  read_if(j, "pseudo_threshold", c.pseudo_threshold);
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return experiment_config_from_json(Json::parse(in));
}

std::vector<std::string> config_diff(const Json& a, const Json& b) {
  std::map<std::string, Json> fa;
  std::map<std::string, Json> fb;
  flatten(a, "", fa);
  flatten(b, "", fb);
  std::set<std::string> keys;
  for (const auto& [k, _] : fa) keys.insert(k);
  for (const auto& [k, _] : fb) keys.insert(k);
  std::vector<std::string> out;
  for (const std::string& k : keys) {
    auto ia = fa.find(k);
    auto ib = fb.find(k);
    if (ia == fa.end() || ib == fb.end() || ia->second != ib->second) out.push_back(k);
  }
  return out;
}

// --- dataset records ------------------------------------------------------

Json image_to_json(const SynthImage& img) {
  Json dets = Json::array();
  for (const auto* list : {&img.human_detections, &img.object_detections}) {
    for (const Detection& d : *list)
      dets.push_back({{"box", box_to_json(d.box)}, {"class_id", d.class_id}, {"confidence", d.confidence}});
  }
  Json triplets = Json::array();
  for (const GtTriplet& t : img.gt_triplets) triplets.push_back(triplet_to_json(t));
  return {{"image_id", img.image_id},
          {"supervision", std::string(to_string(img.supervision))},
          {"detections", dets},
          {"gt_triplets", triplets},
          {"image_labels", img.image_labels}};
}

SynthImage image_from_json(const Json& j) {
  SynthImage img;
  img.image_id = j.at("image_id").get<int>();
  img.supervision = parse_supervision(j.at("supervision").get<std::string>());
  for (const Json& d : j.at("detections")) {
    Detection det{box_from_json(d.at("box")), d.at("class_id").get<int>(), d.at("confidence").get<double>()};
    (det.is_human() ? img.human_detections : img.object_detections).push_back(det);
  }
  for (const Json& t : j.at("gt_triplets")) img.gt_triplets.push_back(triplet_from_json(t));
  img.image_labels = j.at("image_labels").get<std::vector<int>>();
  return img;
}

void save_world(const World& world, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "world_config.json");
    out << to_json(world.config).dump(2) << '\n';
  }
  std::ofstream out(dir / "images.jsonl");
  if (!out) throw std::runtime_error("cannot write " + (dir / "images.jsonl").string());
  for (const SynthImage& img : world.images) out << image_to_json(img).dump() << '\n';
}

World load_world(const fs::path& dir) {
  std::ifstream cfg_in(dir / "world_config.json");
  if (!cfg_in) throw std::runtime_error("cannot open " + (dir / "world_config.json").string());
  const WorldConfig cfg = world_config_from_json(Json::parse(cfg_in));
  std::ifstream in(dir / "images.jsonl");
  if (!in) throw std::runtime_error("cannot open " + (dir / "images.jsonl").string());
  std::vector<SynthImage> images;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    images.push_back(image_from_json(Json::parse(line)));
  }
  return assemble_world(cfg, std::move(images));
}

void save_pseudo_labels(const std::map<int, std::vector<GtTriplet>>& labels,
                        const std::vector<SynthImage>& images, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const SynthImage& img : images) {
    auto it = labels.find(img.image_id);
    if (it == labels.end()) continue;
    Json triplets = Json::array();
    for (const GtTriplet& t : it->second) {
      Json tj = triplet_to_json(t);
      tj["pseudo"] = true;
      triplets.push_back(tj);
    }
    out << Json{{"image_id", img.image_id},
                {"supervision", std::string(to_string(img.supervision))},
                {"pseudo", true},
                {"gt_triplets", triplets}}
               .dump()
        << '\n';
  }
}

// --- evaluation ------------------------------------------------------------

Json to_json(const EvalReport& r) {
  Json ap = Json::array();
  for (const auto& v : r.ap_per_class) ap.push_back(v ? Json(*v) : Json(nullptr));
  return {{"map_full", nan_as_null(r.map_full)},
          {"map_rare", nan_as_null(r.map_rare)},
          {"map_nonrare", nan_as_null(r.map_nonrare)},
          {"rare_class_ids", r.rare_class_ids},
          {"ap_per_class", ap}};
}

// --- checkpoints -------------------------------------------------------------

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  Json tensors = Json::array();
  std::vector<std::pair<const double*, std::size_t>> blobs;
  auto add = [&](const std::string& prefix, const ModelParamsd& p) {
    p.for_each_tensor([&](const char* name, const auto& t) {
      tensors.push_back({{"name", prefix + name}, {"rows", t.rows()}, {"cols", t.cols()}});
      blobs.emplace_back(t.data(), static_cast<std::size_t>(t.size()));
    });
  };
  add("params.", ckpt.params);
  add("z_ws.", ckpt.momentum.z_ws);
  add("z_fs.", ckpt.momentum.z_fs);
  const Json header = {{"config", ckpt.config},
                       {"iteration", ckpt.iteration},
                       {"momentum_t", ckpt.momentum.t},
                       {"tensors", tensors}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [data, n] : blobs)
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!out) throw std::runtime_error("short write on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error(path.string() + " is not a checkpoint");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const Json header = Json::parse(text);

  Checkpoint ckpt;
  ckpt.config = header.at("config");
  ckpt.iteration = header.at("iteration").get<long>();
  ckpt.momentum.t = header.at("momentum_t").get<long>();

  std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> shapes;
  for (const Json& t : header.at("tensors"))
    shapes[t.at("name").get<std::string>()] = {t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>()};

  // Tensors are stored in header order, which matches for_each_tensor order.
  auto read = [&](const std::string& prefix, ModelParamsd& p) {
    p.for_each_tensor([&](const char* name, auto& t) {
      auto it = shapes.find(prefix + name);
      if (it == shapes.end()) throw std::runtime_error("checkpoint missing tensor " + prefix + name);
      using Tensor = std::decay_t<decltype(t)>;
      if constexpr (Tensor::ColsAtCompileTime == 1) {
        t.resize(it->second.first);
      } else {
        t.resize(it->second.first, it->second.second);
      }
      in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
      if (!in) throw std::runtime_error("truncated checkpoint tensor " + prefix + name);
    });
  };
  read("params.", ckpt.params);
  read("z_ws.", ckpt.momentum.z_ws);
  read("z_fs.", ckpt.momentum.z_fs);
  return ckpt;
}

}  // namespace mxhoi
