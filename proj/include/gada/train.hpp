#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gada/model.hpp"
#include "gada/synth.hpp"

namespace gada {

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 2000;          // one balanced batch and one Adam step per epoch
  int batch_size = 100;       // must be even; half positives, half negatives
  int regen_interval = 50;    // epochs between graph regeneration
  int warmup_exclusion = 0;   // leading noise-schedule entries skipped
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  int eval_interval = 50;     // epochs between validation AUC evaluations
  int threads = 0;            // 0 = hardware concurrency

  void validate() const;  // throws ConfigError
};

struct AdamState {
  TensorMap m;  // first moment
  TensorMap v;  // second moment
  long long step = 0;
};

AdamState make_adam_state(const ModelConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double node_loss = 0.0;
  double graph_loss = 0.0;
  double val_auc = 0.0;
  bool has_val_auc = false;
};

struct TrainHistory {
  double initial_val_auc = 0.0;
  std::vector<EpochRecord> epochs;
};

// Line-delimited history log, one JSON object per epoch.
void save_history(const TrainHistory& history, const std::string& path);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Mean squared error against +-1 node labels. Empty graphs contribute 0.
double node_loss(const std::vector<double>& node_scores, const std::vector<int>& node_labels);

// Binary cross-entropy with logits, in the stable log-sum-exp form.
double graph_loss(double graph_logit, int video_label);

struct LossBreakdown {
  double total = 0.0;
  double node = 0.0;
  double graph = 0.0;
};

LossBreakdown total_loss(const VideoGraph& graph, const Parameters& params, const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

// Exact reverse-mode gradient of total_loss w.r.t. every parameter scalar.
// The breakdown of the corresponding forward pass is returned via `loss` when
// non-null. An empty graph yields all-zero gradients.
TensorMap backward(const VideoGraph& graph, const Parameters& params, const ModelConfig& cfg,
                   LossBreakdown* loss = nullptr);

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_fd = 0.0;
  std::size_t coords_checked = 0;
  double tolerance = 0.0;

  bool pass() const { return max_rel_err <= tolerance; }
};

// Central finite differences over a seeded sample of coordinates covering
// every tensor name (at least min_coords in total). `injected` substitutes the
// analytic gradients under test; by default backward() is used.
GradCheckResult grad_check(const VideoGraph& graph, const Parameters& params,
                           const ModelConfig& cfg, double fd_step, double tolerance,
                           std::uint64_t seed, std::size_t min_coords = 200,
                           const TensorMap* injected = nullptr);

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

// Standard bias-corrected Adam update, in place.
void adam_step(Parameters& params, const TensorMap& grads, AdamState& state,
               const TrainConfig& cfg);

struct TrainResult {
  Parameters params;  // best validation-AUC snapshot
  TrainHistory history;
  int best_epoch = 0;
  double best_val_auc = 0.0;
};

// Balanced-batch training with periodic graph regeneration from perturbed
// copies of the training detections (the noise schedule cycles after
// warmup_exclusion entries are skipped). Deterministic for fixed seeds,
// independent of thread count. `progress` (optional) is invoked after every
// epoch with the record just appended to the history.
TrainResult train(const Dataset& train_data, const Dataset& val_data, const GraphConfig& gcfg,
                  const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const std::vector<PerturbConfig>& noise_schedule,
                  const std::function<void(const EpochRecord&)>& progress = {});

// Seeded small random graph (3-12 nodes, clustered boxes so window/IoU edges
// occur) used by the gradient-check command and the verification suites.
VideoGraph make_gradcheck_graph(std::uint64_t seed);

}  // namespace gada
