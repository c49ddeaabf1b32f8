#include "gada/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gada {

using nlohmann::json;

void RunConfig::validate() const {
  if (n_train < 0 || n_val < 0 || n_test < 0) throw ConfigError("split sizes must be >= 0");
  generator.validate();
  for (const PerturbConfig& p : schedule) p.validate();
  graph.validate();
  model.validate();
  train.validate();
  if (graph.feature_mask.dims() != model.node_in_dim) {
    throw ConfigError("model.node_in_dim must match the graph feature mask (" +
                      std::to_string(graph.feature_mask.dims()) + " dims)");
  }
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.schedule = {
      {0.05, 0.010, 0.05, 0.20},  // moderate
      {0.02, 0.005, 0.02, 0.10},  // mild
      {0.0, 0.0, 0.0, 0.0},       // clean
  };
  cfg.model.node_in_dim = cfg.graph.feature_mask.dims();
  return cfg;
}

namespace {

// Strict object reader: every key must be known, values type-checked.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(context_ + " must be an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) remaining_.insert(it.key());
  }

  ~ObjectReader() = default;

  void finish() {
    if (!remaining_.empty()) {
      throw ConfigError("unknown key '" + *remaining_.begin() + "' in " + context_);
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    remaining_.erase(key);
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(context_ + "." + key + " has the wrong type");
    }
  }

  bool has(const char* key) const { return j_.find(key) != j_.end(); }

  const json& raw(const char* key) {
    remaining_.erase(key);
    return j_.at(key);
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> remaining_;
};

GeneratorConfig read_generator(const json& j, const GeneratorConfig& base) {
  GeneratorConfig cfg = base;
  ObjectReader r(j, "generator");
  r.get("n_videos", cfg.n_videos);
  r.get("positive_fraction", cfg.positive_fraction);
  r.get("frames_min", cfg.frames_min);
  r.get("frames_max", cfg.frames_max);
  r.get("tracks_per_positive_min", cfg.tracks_per_positive_min);
  r.get("tracks_per_positive_max", cfg.tracks_per_positive_max);
  r.get("track_length_min", cfg.track_length_min);
  r.get("track_length_max", cfg.track_length_max);
  r.get("drift_sigma", cfg.drift_sigma);
  r.get("track_conf_alpha", cfg.track_conf_alpha);
  r.get("track_conf_beta", cfg.track_conf_beta);
  r.get("clutter_rate", cfg.clutter_rate);
  r.get("clutter_conf_alpha", cfg.clutter_conf_alpha);
  r.get("clutter_conf_beta", cfg.clutter_conf_beta);
  r.get("detect_drop_prob", cfg.detect_drop_prob);
  r.get("spurious_burst_prob", cfg.spurious_burst_prob);
  r.get("distractor_tracks", cfg.distractor_tracks);
  r.finish();
  return cfg;
}

PerturbConfig read_perturb(const json& j, const std::string& context) {
  PerturbConfig cfg;
  ObjectReader r(j, context);
  r.get("conf_noise_sigma", cfg.conf_noise_sigma);
  r.get("box_jitter_sigma", cfg.box_jitter_sigma);
  r.get("drop_prob", cfg.drop_prob);
  r.get("spurious_rate", cfg.spurious_rate);
  r.finish();
  return cfg;
}

GraphConfig read_graph(const json& j, const GraphConfig& base) {
  GraphConfig cfg = base;
  ObjectReader r(j, "graph");
  r.get("frame_window", cfg.frame_window);
  r.get("iou_threshold", cfg.iou_threshold);
  r.get("conf_threshold", cfg.conf_threshold);
  if (r.has("features")) {
    std::vector<std::string> names;
    try {
      names = r.raw("features").get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw ConfigError("graph.features must be an array of strings");
    }
    FeatureMask mask{false, false, false};
    for (const std::string& name : names) {
      const FeatureMask one = feature_mask_from_name(name);
      mask.position |= one.position;
      mask.size |= one.size;
      mask.confidence |= one.confidence;
    }
    cfg.feature_mask = mask;
  }
  r.get("use_edge_features", cfg.use_edge_features);
  r.finish();
  return cfg;
}

ModelConfig read_model(const json& j, const ModelConfig& base) {
  ModelConfig cfg = base;
  ObjectReader r(j, "model");
  r.get("num_layers", cfg.num_layers);
  r.get("num_heads", cfg.num_heads);
  r.get("hidden_dim", cfg.hidden_dim);
  r.get("phi_hidden", cfg.phi_hidden);
  r.get("normalize_node_weights", cfg.normalize_node_weights);
  r.finish();
  return cfg;
}

TrainConfig read_train(const json& j, const TrainConfig& base) {
  TrainConfig cfg = base;
  ObjectReader r(j, "train");
  r.get("learning_rate", cfg.learning_rate);
  r.get("epochs", cfg.epochs);
  r.get("batch_size", cfg.batch_size);
  r.get("regen_interval", cfg.regen_interval);
  r.get("warmup_exclusion", cfg.warmup_exclusion);
  r.get("adam_beta1", cfg.adam_beta1);
  r.get("adam_beta2", cfg.adam_beta2);
  r.get("adam_eps", cfg.adam_eps);
  r.get("eval_interval", cfg.eval_interval);
  r.get("threads", cfg.threads);
  r.finish();
  return cfg;
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("unparseable config: ") + e.what());
  }
  RunConfig cfg = default_run_config();
  ObjectReader r(j, "config");
  r.get("seed", cfg.seed);
  if (r.has("splits")) {
    ObjectReader rs(r.raw("splits"), "splits");
    rs.get("train", cfg.n_train);
    rs.get("val", cfg.n_val);
    rs.get("test", cfg.n_test);
    rs.finish();
  }
  if (r.has("generator")) cfg.generator = read_generator(r.raw("generator"), cfg.generator);
  if (r.has("perturb_schedule")) {
    const json& arr = r.raw("perturb_schedule");
    if (!arr.is_array()) throw ConfigError("perturb_schedule must be an array");
    cfg.schedule.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cfg.schedule.push_back(read_perturb(arr[i], "perturb_schedule[" + std::to_string(i) + "]"));
    }
  }
  if (r.has("graph")) cfg.graph = read_graph(r.raw("graph"), cfg.graph);
  if (r.has("model")) cfg.model = read_model(r.raw("model"), cfg.model);
  if (r.has("train")) cfg.train = read_train(r.raw("train"), cfg.train);
  r.finish();
  cfg.model.node_in_dim = cfg.graph.feature_mask.dims();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on config file: " + path);
  return run_config_from_json_text(buf.str());
}

}  // namespace gada
