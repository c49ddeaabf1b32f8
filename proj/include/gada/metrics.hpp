#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gada/model.hpp"
#include "gada/synth.hpp"
#include "gada/train.hpp"

namespace gada {

struct ScoredVideo {
  std::string video_id;
  int label = 0;
  double score = 0.0;
  int predicted = -1;  // filled by confusion_metrics
};

struct MetricsReport {
  double auc = 0.0;
  double threshold = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double accuracy = 0.0;
  int n_pos = 0;
  int n_neg = 0;
};

// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
// ties counted half. Exact integer pair counting; throws ConfigError on
// single-class input.
double auc(const std::vector<ScoredVideo>& scored);

// Threshold maximizing (sensitivity + specificity) / 2 over all midpoint
// candidates plus the +-infinity sentinels; ties resolve to the lowest
// (highest-sensitivity) threshold. Prediction rule is score >= threshold.
double select_threshold(const std::vector<ScoredVideo>& val_scored);

// Confusion counts at a threshold; fills `predicted` in place. AUC is
// included when both classes are present.
MetricsReport confusion_metrics(std::vector<ScoredVideo>& scored, double threshold);

// Two-sided exact binomial McNemar test on discordant counts.
double mcnemar_exact(long long b, long long c);

// Mean over frames of the maximum detection confidence (0 for empty frames).
double baseline_detector_frame_avg(const VideoRecord& record);

// Graph-model probability per video, in record order.
std::vector<ScoredVideo> score_dataset(const Dataset& dataset, const Parameters& params,
                                       const GraphConfig& gcfg, const ModelConfig& mcfg);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct ExperimentSetup {
  GraphConfig graph;
  ModelConfig model;
  TrainConfig train;
  std::vector<PerturbConfig> schedule;
};

enum class SweepAxis { kEpsilon, kDelta };

struct SweepRow {
  double value = 0.0;
  double test_auc = 0.0;
};

// One row per value of the chosen graph-construction parameter. retrain=true
// trains a fresh model per row (same seeds); retrain=false re-scores the
// frozen parameters after rebuilding graphs at each value.
std::vector<SweepRow> sweep(const Dataset& train_data, const Dataset& val_data,
                            const Dataset& test_data, const ExperimentSetup& setup,
                            SweepAxis axis, const std::vector<double>& values, bool retrain,
                            const Parameters* frozen = nullptr);

struct AblationSpec {
  std::string name;
  FeatureMask mask;
  bool use_edge_features = true;
};

struct AblationRow {
  AblationSpec spec;
  double test_auc = 0.0;
};

// One full train+eval per mask row; node_in_dim follows each mask.
std::vector<AblationRow> ablate_features(const Dataset& train_data, const Dataset& val_data,
                                         const Dataset& test_data, const ExperimentSetup& setup,
                                         const std::vector<AblationSpec>& rows);

struct RobustnessRow {
  int level = 0;
  double auc = 0.0;
  double delta_vs_clean = 0.0;
};

// Frozen-weights evaluation under a perturbation schedule; level i perturbs
// the test detections with schedule[i] under a derived seed. An all-zero
// level reproduces the clean AUC exactly.
std::vector<RobustnessRow> robustness_eval(const Dataset& test_data, const Parameters& params,
                                           const GraphConfig& gcfg, const ModelConfig& mcfg,
                                           const std::vector<PerturbConfig>& schedule,
                                           std::uint64_t seed);

// Plot-ready structured export of one video's node scores, node weights and
// final-layer head-mean edge attention.
void export_visualization(const VideoGraph& graph, const GraphOutput& output,
                          const std::string& path);

// Delimiter-separated table writers used by the CLI.
void write_sweep_table(const std::vector<SweepRow>& rows, SweepAxis axis,
                       const std::string& path);
void write_ablation_table(const std::vector<AblationRow>& rows, const std::string& path);
void write_robustness_table(const std::vector<RobustnessRow>& rows, const std::string& path);

}  // namespace gada
