#include "gada/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "gada/rng.hpp"
#include "json.hpp"

namespace gada {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::pair<long long, long long> class_counts(const std::vector<ScoredVideo>& scored) {
  long long pos = 0, neg = 0;
  for (const ScoredVideo& s : scored) (s.label == 1 ? pos : neg)++;
  return {pos, neg};
}

}  // namespace

double auc(const std::vector<ScoredVideo>& scored) {
  const auto [n_pos, n_neg] = class_counts(scored);
  if (n_pos == 0 || n_neg == 0) {
    throw ConfigError("auc requires at least one video of each class");
  }
  std::vector<std::pair<double, int>> sorted;
  sorted.reserve(scored.size());
  for (const ScoredVideo& s : scored) sorted.emplace_back(s.score, s.label);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Integer pair counting over tie groups: numerator = 2*wins + ties.
  long long numerator = 0;
  long long neg_below = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    long long pos_here = 0, neg_here = 0;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      (sorted[j].second == 1 ? pos_here : neg_here)++;
      ++j;
    }
    numerator += 2 * pos_here * neg_below + pos_here * neg_here;
    neg_below += neg_here;
    i = j;
  }
  return static_cast<double>(numerator) / static_cast<double>(2 * n_pos * n_neg);
}

namespace {

double balanced_accuracy_at(const std::vector<ScoredVideo>& scored, double threshold,
                            long long n_pos, long long n_neg) {
  long long tp = 0, tn = 0;
  for (const ScoredVideo& s : scored) {
    const bool pred_pos = s.score >= threshold;
    if (s.label == 1 && pred_pos) ++tp;
    if (s.label == 0 && !pred_pos) ++tn;
  }
  const double sens = static_cast<double>(tp) / static_cast<double>(n_pos);
  const double spec = static_cast<double>(tn) / static_cast<double>(n_neg);
  return 0.5 * (sens + spec);
}

}  // namespace

double select_threshold(const std::vector<ScoredVideo>& val_scored) {
  const auto [n_pos, n_neg] = class_counts(val_scored);
  if (n_pos == 0 || n_neg == 0) {
    throw ConfigError("select_threshold requires at least one video of each class");
  }
  std::vector<double> scores;
  scores.reserve(val_scored.size());
  for (const ScoredVideo& s : val_scored) scores.push_back(s.score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  std::vector<double> candidates;
  candidates.push_back(-kInf);  // everything positive
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    candidates.push_back(0.5 * (scores[i] + scores[i + 1]));
  }
  candidates.push_back(kInf);  // everything negative

  // Ascending scan keeps the lowest threshold on ties.
  double best_threshold = candidates.front();
  double best_value = -1.0;
  for (double t : candidates) {
    const double value = balanced_accuracy_at(val_scored, t, n_pos, n_neg);
    if (value > best_value) {
      best_value = value;
      best_threshold = t;
    }
  }
  return best_threshold;
}

MetricsReport confusion_metrics(std::vector<ScoredVideo>& scored, double threshold) {
  MetricsReport rep;
  rep.threshold = threshold;
  long long tp = 0, tn = 0, fp = 0, fn = 0;
  for (ScoredVideo& s : scored) {
    s.predicted = s.score >= threshold ? 1 : 0;
    if (s.label == 1) {
      (s.predicted == 1 ? tp : fn)++;
    } else {
      (s.predicted == 0 ? tn : fp)++;
    }
  }
  rep.n_pos = static_cast<int>(tp + fn);
  rep.n_neg = static_cast<int>(tn + fp);
  rep.sensitivity = rep.n_pos > 0 ? static_cast<double>(tp) / rep.n_pos : 1.0;
  rep.specificity = rep.n_neg > 0 ? static_cast<double>(tn) / rep.n_neg : 1.0;
  const long long n = tp + tn + fp + fn;
  rep.accuracy = n > 0 ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
  rep.auc = (rep.n_pos > 0 && rep.n_neg > 0) ? auc(scored) : 0.5;
  return rep;
}

double mcnemar_exact(long long b, long long c) {
  if (b < 0 || c < 0) throw ConfigError("mcnemar_exact requires nonnegative counts");
  const long long n = b + c;
  if (n == 0) return 1.0;
  const long long k_max = std::min(b, c);
  // P(X <= k_max) for X ~ Binomial(n, 1/2), term-by-term to avoid overflow.
  double term = std::pow(0.5, static_cast<double>(n));  // P(X = 0)
  double tail = term;
  for (long long k = 0; k < k_max; ++k) {
    term *= static_cast<double>(n - k) / static_cast<double>(k + 1);
    tail += term;
  }
  return std::min(1.0, 2.0 * tail);
}

double baseline_detector_frame_avg(const VideoRecord& record) {
  if (record.frames.empty()) return 0.0;
  double acc = 0.0;
  for (const FrameDetections& f : record.frames) {
    double mx = 0.0;
    for (const BoundingBox& b : f.boxes) mx = std::max(mx, b.c);
    acc += mx;
  }
  return acc / static_cast<double>(record.frames.size());
}

std::vector<ScoredVideo> score_dataset(const Dataset& dataset, const Parameters& params,
                                       const GraphConfig& gcfg, const ModelConfig& mcfg) {
  std::vector<ScoredVideo> out;
  out.reserve(dataset.records.size());
  for (const VideoRecord& rec : dataset.records) {
    const VideoGraph g = build_graph(rec, gcfg);
    const GraphOutput o = forward(g, params, mcfg);
    out.push_back({rec.video_id, rec.label, o.probability, -1});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

namespace {

double trained_test_auc(const Dataset& train_data, const Dataset& val_data,
                        const Dataset& test_data, const ExperimentSetup& setup) {
  const TrainResult r =
      train(train_data, val_data, setup.graph, setup.model, setup.train, setup.schedule);
  return auc(score_dataset(test_data, r.params, setup.graph, setup.model));
}

}  // namespace

std::vector<SweepRow> sweep(const Dataset& train_data, const Dataset& val_data,
                            const Dataset& test_data, const ExperimentSetup& setup,
                            SweepAxis axis, const std::vector<double>& values, bool retrain,
                            const Parameters* frozen) {
  if (values.empty()) throw ConfigError("sweep requires at least one value");
  if (!retrain && frozen == nullptr) {
    throw ConfigError("frozen-weights sweep requires trained parameters");
  }
  std::vector<SweepRow> rows;
  for (double value : values) {
    ExperimentSetup cell = setup;
    if (axis == SweepAxis::kEpsilon) {
      cell.graph.frame_window = static_cast<int>(value);
    } else {
      cell.graph.iou_threshold = value;
    }
    cell.graph.validate();
    double cell_auc;
    if (retrain) {
      cell_auc = trained_test_auc(train_data, val_data, test_data, cell);
    } else {
      cell_auc = auc(score_dataset(test_data, *frozen, cell.graph, cell.model));
    }
    rows.push_back({value, cell_auc});
  }
  return rows;
}

std::vector<AblationRow> ablate_features(const Dataset& train_data, const Dataset& val_data,
                                         const Dataset& test_data, const ExperimentSetup& setup,
                                         const std::vector<AblationSpec>& rows) {
  if (rows.empty()) throw ConfigError("ablation requires at least one row");
  std::vector<AblationRow> out;
  for (const AblationSpec& spec : rows) {
    if (!spec.mask.any()) throw ConfigError("ablation mask must keep at least one feature");
    ExperimentSetup cell = setup;
    cell.graph.feature_mask = spec.mask;
    cell.graph.use_edge_features = spec.use_edge_features;
    cell.model.node_in_dim = spec.mask.dims();
    out.push_back({spec, trained_test_auc(train_data, val_data, test_data, cell)});
  }
  return out;
}

std::vector<RobustnessRow> robustness_eval(const Dataset& test_data, const Parameters& params,
                                           const GraphConfig& gcfg, const ModelConfig& mcfg,
                                           const std::vector<PerturbConfig>& schedule,
                                           std::uint64_t seed) {
  if (schedule.empty()) throw ConfigError("robustness schedule must be nonempty");
  const double clean_auc = auc(score_dataset(test_data, params, gcfg, mcfg));
  std::vector<RobustnessRow> rows;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    double level_auc;
    if (schedule[i].is_zero()) {
      level_auc = clean_auc;  // identity perturbation, bit-identical scores
    } else {
      const Dataset perturbed = perturb_dataset(test_data, schedule[i], derive_seed(seed, i));
      level_auc = auc(score_dataset(perturbed, params, gcfg, mcfg));
    }
    rows.push_back({static_cast<int>(i), level_auc, level_auc - clean_auc});
  }
  return rows;
}

void export_visualization(const VideoGraph& graph, const GraphOutput& output,
                          const std::string& path) {
  if (output.node_scores.size() != graph.nodes.size()) {
    throw ShapeError("visualization export: output does not match graph");
  }
  json nodes = json::array();
  for (std::size_t v = 0; v < graph.nodes.size(); ++v) {
    const Node& n = graph.nodes[v];
    const auto [cx, cy] = box_center(n.box);
    nodes.push_back({{"t", n.frame_index},
                     {"cx", cx},
                     {"cy", cy},
                     {"conf", n.box.c},
                     {"score", output.node_scores[v]},
                     {"beta", output.node_weights[v]}});
  }
  json edges = json::array();
  const std::size_t n_layers = output.attention.size();
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    double mean_alpha = 0.0;
    if (n_layers > 0) {
      const auto& final_layer = output.attention[n_layers - 1];
      for (const auto& head : final_layer) mean_alpha += head[e];
      mean_alpha /= static_cast<double>(final_layer.size());
    }
    edges.push_back(
        {{"src", graph.edges[e].src}, {"dst", graph.edges[e].dst}, {"alpha", mean_alpha}});
  }
  json j = {{"video_id", graph.video_id},
            {"label", graph.label},
            {"nodes", std::move(nodes)},
            {"edges", std::move(edges)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open visualization export for writing: " + path);
  out << j.dump() << '\n';
  if (!out) throw IoError("write failure on visualization export: " + path);
}

// ---------------------------------------------------------------------------
// Table writers
// ---------------------------------------------------------------------------

// Each table goes out twice: tab-separated at `path`, structured at
// `path`.json.

namespace {

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open table for writing: " + path);
  out << body;
  if (!out) throw IoError("write failure on table: " + path);
}

}  // namespace

void write_sweep_table(const std::vector<SweepRow>& rows, SweepAxis axis,
                       const std::string& path) {
  const char* axis_name = axis == SweepAxis::kEpsilon ? "epsilon" : "delta";
  std::string body = std::string(axis_name) + "\ttest_auc\n";
  json jrows = json::array();
  char buf[64];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%g\t%.6f\n", r.value, r.test_auc);
    body += buf;
    jrows.push_back({{axis_name, r.value}, {"test_auc", r.test_auc}});
  }
  write_text(path, body);
  write_text(path + ".json", json{{"axis", axis_name}, {"rows", std::move(jrows)}}.dump() + "\n");
}

void write_ablation_table(const std::vector<AblationRow>& rows, const std::string& path) {
  std::string body = "features\tedge_features\ttest_auc\n";
  json jrows = json::array();
  char buf[64];
  for (const AblationRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "\t%s\t%.6f\n", r.spec.use_edge_features ? "yes" : "no",
                  r.test_auc);
    body += r.spec.mask.name() + buf;
    jrows.push_back({{"features", r.spec.mask.name()},
                     {"edge_features", r.spec.use_edge_features},
                     {"test_auc", r.test_auc}});
  }
  write_text(path, body);
  write_text(path + ".json", json{{"rows", std::move(jrows)}}.dump() + "\n");
}

void write_robustness_table(const std::vector<RobustnessRow>& rows, const std::string& path) {
  std::string body = "level\tauc\tdelta_vs_clean\n";
  json jrows = json::array();
  char buf[64];
  for (const RobustnessRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%+.6f\n", r.level, r.auc, r.delta_vs_clean);
    body += buf;
    jrows.push_back(
        {{"level", r.level}, {"auc", r.auc}, {"delta_vs_clean", r.delta_vs_clean}});
  }
  write_text(path, body);
  write_text(path + ".json", json{{"rows", std::move(jrows)}}.dump() + "\n");
}

}  // namespace gada
