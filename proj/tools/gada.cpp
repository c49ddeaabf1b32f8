// gada: detection-stream experiments from the command line.
//
// Subcommands: generate, train, eval, gradcheck, sweep, ablate, robustness,
// viz. Every command is reproducible from (config file, seed) alone.
// Exit codes: 0 success/PASS, 1 check failure, 2 config error, 3 I/O error,
// 4 shape/compatibility error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gada/config.hpp"
#include "gada/kernels.hpp"
#include "gada/metrics.hpp"
#include "gada/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace gada;

namespace {

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg = opts.config_path.empty() ? default_run_config() : load_run_config(opts.config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON experiment config");
  cmd->add_option("--seed", opts.seed, "master seed (overrides the config file)")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
}

std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad numeric value '" + item + "'");
    }
  }
  return out;
}

Dataset load_split(const std::string& dir, Split split) {
  return load_dataset((fs::path(dir) / (std::string(split_name(split)) + ".jsonl")).string(),
                      split);
}

void report_to_stdout(const MetricsReport& rep) {
  std::printf("auc          %.6f\n", rep.auc);
  if (std::isfinite(rep.threshold)) {
    std::printf("threshold    %.6f\n", rep.threshold);
  } else {
    std::printf("threshold    %s\n", rep.threshold > 0 ? "+inf" : "-inf");
  }
  std::printf("sensitivity  %.6f\n", rep.sensitivity);
  std::printf("specificity  %.6f\n", rep.specificity);
  std::printf("accuracy     %.6f\n", rep.accuracy);
  std::printf("n_pos        %d\n", rep.n_pos);
  std::printf("n_neg        %d\n", rep.n_neg);
}

void write_report_json(const MetricsReport& rep, const std::string& path) {
  nlohmann::json j = {{"auc", rep.auc},          {"sensitivity", rep.sensitivity},
                      {"specificity", rep.specificity}, {"accuracy", rep.accuracy},
                      {"n_pos", rep.n_pos},      {"n_neg", rep.n_neg}};
  if (std::isfinite(rep.threshold)) {
    j["threshold"] = rep.threshold;
  } else {
    j["threshold"] = rep.threshold > 0 ? "+inf" : "-inf";
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open report for writing: " + path);
  out << j.dump() << '\n';
  if (!out) throw IoError("write failure on report: " + path);
}

std::function<void(const EpochRecord&)> progress_printer(const TrainConfig& tcfg) {
  return [&tcfg](const EpochRecord& r) {
    if (r.has_val_auc || r.epoch == 1 || r.epoch % tcfg.eval_interval == 0) {
      std::fprintf(stderr, "epoch %5d  loss %.4f (node %.4f, graph %.4f)", r.epoch, r.loss,
                   r.node_loss, r.graph_loss);
      if (r.has_val_auc) std::fprintf(stderr, "  val_auc %.4f", r.val_auc);
      std::fprintf(stderr, "\n");
    }
  };
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_generate(const CommonOpts& common, const std::string& out_dir) {
  const RunConfig cfg = resolve_config(common);
  fs::create_directories(out_dir);
  struct SplitPlan {
    Split split;
    int count;
    SeedStream stream;
  };
  const SplitPlan plans[] = {{Split::kTrain, cfg.n_train, kSeedGenTrain},
                             {Split::kVal, cfg.n_val, kSeedGenVal},
                             {Split::kTest, cfg.n_test, kSeedGenTest}};
  for (const SplitPlan& plan : plans) {
    GeneratorConfig gen = cfg.generator;
    gen.n_videos = plan.count;
    const Dataset ds = generate_dataset(gen, derive_seed(cfg.seed, plan.stream),
                                        split_name(plan.split), plan.split);
    const std::string path =
        (fs::path(out_dir) / (std::string(split_name(plan.split)) + ".jsonl")).string();
    save_dataset(ds, path);
    int n_pos = 0;
    for (const VideoRecord& r : ds.records) n_pos += r.label;
    std::printf("%s: %zu videos (%d positive) -> %s\n", split_name(plan.split),
                ds.records.size(), n_pos, path.c_str());
  }
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& data_dir,
              const std::string& out_checkpoint, const std::string& history_path) {
  RunConfig cfg = resolve_config(common);
  const Dataset train_ds = load_split(data_dir, Split::kTrain);
  const Dataset val_ds = load_split(data_dir, Split::kVal);
  cfg.train.seed = derive_seed(cfg.seed, kSeedTraining);
  std::fprintf(stderr, "kernels: %s\n", kernels::backend_name(kernels::active_backend()));
  const TrainResult result = train(train_ds, val_ds, cfg.graph, cfg.model, cfg.train,
                                   cfg.schedule, progress_printer(cfg.train));
  save_checkpoint(result.params, cfg.model, out_checkpoint);
  if (!history_path.empty()) save_history(result.history, history_path);
  std::printf("parameters   %zu\n", param_count(result.params));
  std::printf("best_epoch   %d\n", result.best_epoch);
  std::printf("best_val_auc %.6f\n", result.best_val_auc);
  std::printf("checkpoint   %s\n", out_checkpoint.c_str());
  return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& checkpoint_path,
             const std::string& data_path, const std::string& val_path, double threshold,
             bool threshold_set, const std::string& out_path) {
  const RunConfig cfg = resolve_config(common);
  auto [params, mcfg] = load_checkpoint(checkpoint_path);
  const Dataset test_ds = load_dataset(data_path, Split::kTest);

  double thr = threshold_set ? threshold : 0.5;
  if (!val_path.empty()) {
    const Dataset val_ds = load_dataset(val_path, Split::kVal);
    thr = select_threshold(score_dataset(val_ds, params, cfg.graph, mcfg));
  }
  std::vector<ScoredVideo> scored = score_dataset(test_ds, params, cfg.graph, mcfg);
  const MetricsReport rep = confusion_metrics(scored, thr);
  report_to_stdout(rep);
  if (!out_path.empty()) write_report_json(rep, out_path);
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, double fd_step, double tolerance, int n_graphs,
                  std::size_t min_coords) {
  ModelConfig mcfg;
  double worst = 0.0;
  std::string worst_desc;
  std::size_t coords = 0;
  for (int i = 0; i < n_graphs; ++i) {
    const VideoGraph g = make_gradcheck_graph(derive_seed(seed, i));
    const Parameters params = init_params(mcfg, derive_seed(seed, 1000 + i));
    const GradCheckResult r =
        grad_check(g, params, mcfg, fd_step, tolerance, derive_seed(seed, 2000 + i), min_coords);
    coords += r.coords_checked;
    std::fprintf(stderr, "graph %2d: %3d nodes %4d edges  max_rel_err %.3e (%s[%zu])\n", i,
                 static_cast<int>(g.nodes.size()), static_cast<int>(g.edges.size()),
                 r.max_rel_err, r.worst_tensor.c_str(), r.worst_index);
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_desc = r.worst_tensor + "[" + std::to_string(r.worst_index) + "]";
    }
  }
  const bool pass = worst <= tolerance;
  std::printf("gradcheck %s: max relative error %.3e (%s) over %zu coordinates, tolerance %.1e\n",
              pass ? "PASS" : "FAIL", worst, worst_desc.c_str(), coords, tolerance);
  return pass ? 0 : 1;
}

int cmd_sweep(const CommonOpts& common, const std::string& axis_name, const std::string& values,
              const std::string& data_dir, const std::string& out_path, bool eval_only,
              const std::string& checkpoint_path) {
  RunConfig cfg = resolve_config(common);
  const SweepAxis axis = axis_name == "epsilon" ? SweepAxis::kEpsilon
                        : axis_name == "delta"  ? SweepAxis::kDelta
                        : throw ConfigError("--axis must be epsilon or delta");
  const Dataset train_ds = load_split(data_dir, Split::kTrain);
  const Dataset val_ds = load_split(data_dir, Split::kVal);
  const Dataset test_ds = load_split(data_dir, Split::kTest);
  cfg.train.seed = derive_seed(cfg.seed, kSeedTraining);
  ExperimentSetup setup{cfg.graph, cfg.model, cfg.train, cfg.schedule};

  Parameters frozen;
  const Parameters* frozen_ptr = nullptr;
  if (eval_only) {
    if (checkpoint_path.empty()) {
      throw ConfigError("--eval-only requires --checkpoint");
    }
    auto [params, mcfg] = load_checkpoint(checkpoint_path);
    frozen = std::move(params);
    setup.model = mcfg;
    frozen_ptr = &frozen;
  }
  const std::vector<SweepRow> rows = sweep(train_ds, val_ds, test_ds, setup, axis,
                                           parse_value_list(values), !eval_only, frozen_ptr);
  write_sweep_table(rows, axis, out_path);
  for (const SweepRow& r : rows) std::printf("%s %g: test_auc %.6f\n", axis_name.c_str(), r.value, r.test_auc);
  return 0;
}

std::vector<AblationSpec> parse_masks(const std::string& text) {
  std::vector<AblationSpec> specs;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ',')) {
    if (row.empty()) continue;
    AblationSpec spec;
    spec.name = row;
    spec.mask = FeatureMask{false, false, false};
    spec.use_edge_features = false;
    std::stringstream rs(row);
    std::string token;
    while (std::getline(rs, token, '+')) {
      if (token == "position") spec.mask.position = true;
      else if (token == "size") spec.mask.size = true;
      else if (token == "confidence") spec.mask.confidence = true;
      else if (token == "edges") spec.use_edge_features = true;
      else throw ConfigError("unknown ablation token '" + token + "'");
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

int cmd_ablate(const CommonOpts& common, const std::string& masks, const std::string& data_dir,
               const std::string& out_path) {
  RunConfig cfg = resolve_config(common);
  const Dataset train_ds = load_split(data_dir, Split::kTrain);
  const Dataset val_ds = load_split(data_dir, Split::kVal);
  const Dataset test_ds = load_split(data_dir, Split::kTest);
  cfg.train.seed = derive_seed(cfg.seed, kSeedTraining);
  const ExperimentSetup setup{cfg.graph, cfg.model, cfg.train, cfg.schedule};
  const std::vector<AblationRow> rows =
      ablate_features(train_ds, val_ds, test_ds, setup, parse_masks(masks));
  write_ablation_table(rows, out_path);
  for (const AblationRow& r : rows) {
    std::printf("%s%s: test_auc %.6f\n", r.spec.mask.name().c_str(),
                r.spec.use_edge_features ? "+edges" : "", r.test_auc);
  }
  return 0;
}

int cmd_robustness(const CommonOpts& common, const std::string& checkpoint_path,
                   const std::string& data_path, const std::string& levels,
                   const std::string& out_path) {
  const RunConfig cfg = resolve_config(common);
  auto [params, mcfg] = load_checkpoint(checkpoint_path);
  const Dataset test_ds = load_dataset(data_path, Split::kTest);
  // Levels are scale factors of the reference perturbation
  // (conf 0.05, jitter 0.01, drop 0.05).
  std::vector<PerturbConfig> schedule;
  for (double s : parse_value_list(levels)) {
    if (s < 0.0) throw ConfigError("robustness levels must be >= 0");
    schedule.push_back({0.05 * s, 0.01 * s, std::min(1.0, 0.05 * s), 0.0});
  }
  const std::vector<RobustnessRow> rows = robustness_eval(
      test_ds, params, cfg.graph, mcfg, schedule, derive_seed(cfg.seed, kSeedRobustness));
  write_robustness_table(rows, out_path);
  for (const RobustnessRow& r : rows) {
    std::printf("level %d: auc %.6f (delta %+.6f)\n", r.level, r.auc, r.delta_vs_clean);
  }
  return 0;
}

int cmd_viz(const CommonOpts& common, const std::string& checkpoint_path,
            const std::string& data_path, const std::string& video_id,
            const std::string& out_path, const std::string& graph_out) {
  const RunConfig cfg = resolve_config(common);
  auto [params, mcfg] = load_checkpoint(checkpoint_path);
  const Dataset ds = load_dataset(data_path);
  const VideoRecord* rec = nullptr;
  for (const VideoRecord& r : ds.records) {
    if (r.video_id == video_id) {
      rec = &r;
      break;
    }
  }
  if (rec == nullptr) throw ConfigError("video_id '" + video_id + "' not found in " + data_path);
  const VideoGraph g = build_graph(*rec, cfg.graph);
  const GraphOutput o = forward(g, params, mcfg);
  export_visualization(g, o, out_path);
  if (!graph_out.empty()) dump_graph(g, graph_out);
  std::printf("video %s: %zu nodes, %zu edges, probability %.6f -> %s\n", video_id.c_str(),
              g.nodes.size(), g.edges.size(), o.probability, out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GADA: spatiotemporal detection graphs with edge-aware attention"};
  app.require_subcommand(1);

  CommonOpts gen_common;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("generate", "Generate train/val/test detection streams");
  add_common(gen, gen_common);
  gen->add_option("--out", gen_out, "output directory")->required();

  CommonOpts train_common;
  std::string train_data, train_ckpt, train_history;
  CLI::App* tr = app.add_subcommand("train", "Train the graph attention model");
  add_common(tr, train_common);
  tr->add_option("--data", train_data, "directory with train.jsonl and val.jsonl")->required();
  tr->add_option("--out-checkpoint", train_ckpt, "checkpoint output path")->required();
  tr->add_option("--history", train_history, "training history log (JSON lines)");

  CommonOpts eval_common;
  std::string eval_ckpt, eval_data, eval_val, eval_out;
  double eval_threshold = 0.5;
  bool eval_threshold_set = false;
  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a detection stream");
  add_common(ev, eval_common);
  ev->add_option("--checkpoint", eval_ckpt)->required();
  ev->add_option("--data", eval_data, "detection stream to score")->required();
  ev->add_option("--val", eval_val, "validation stream for threshold selection");
  ev->add_option("--threshold", eval_threshold, "fixed decision threshold")
      ->each([&eval_threshold_set](const std::string&) { eval_threshold_set = true; });
  ev->add_option("--out", eval_out, "structured report output path");

  std::uint64_t gc_seed = 1;
  double gc_fd_step = 1e-5, gc_tolerance = 1e-4;
  int gc_graphs = 10;
  std::size_t gc_min_coords = 200;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--fd-step", gc_fd_step);
  gc->add_option("--tolerance", gc_tolerance);
  gc->add_option("--graphs", gc_graphs);
  gc->add_option("--min-coords", gc_min_coords);

  CommonOpts sweep_common;
  std::string sweep_axis, sweep_values, sweep_data, sweep_out, sweep_ckpt;
  bool sweep_eval_only = false;
  CLI::App* sw = app.add_subcommand("sweep", "Sweep a graph-construction parameter");
  add_common(sw, sweep_common);
  sw->add_option("--axis", sweep_axis, "epsilon | delta")->required();
  sw->add_option("--values", sweep_values, "comma-separated values")->required();
  sw->add_option("--data", sweep_data, "directory with train/val/test.jsonl")->required();
  sw->add_option("--out", sweep_out, "table output path")->required();
  sw->add_flag("--eval-only", sweep_eval_only, "re-score frozen weights instead of retraining");
  sw->add_option("--checkpoint", sweep_ckpt, "checkpoint for --eval-only");

  CommonOpts abl_common;
  std::string abl_masks, abl_data, abl_out;
  CLI::App* ab = app.add_subcommand("ablate", "Train once per feature-mask row");
  add_common(ab, abl_common);
  ab->add_option("--masks", abl_masks,
                 "comma-separated rows of +-joined tokens from "
                 "{position,size,confidence,edges}")
      ->required();
  ab->add_option("--data", abl_data, "directory with train/val/test.jsonl")->required();
  ab->add_option("--out", abl_out, "table output path")->required();

  CommonOpts rob_common;
  std::string rob_ckpt, rob_data, rob_levels = "0,0.25,0.5,0.75,1", rob_out;
  CLI::App* rb = app.add_subcommand("robustness", "Frozen-weights detector-quality study");
  add_common(rb, rob_common);
  rb->add_option("--checkpoint", rob_ckpt)->required();
  rb->add_option("--data", rob_data, "test detection stream")->required();
  rb->add_option("--levels", rob_levels, "comma-separated perturbation scale factors");
  rb->add_option("--out", rob_out, "table output path")->required();

  CommonOpts viz_common;
  std::string viz_ckpt, viz_data, viz_id, viz_out, viz_graph_out;
  CLI::App* vz = app.add_subcommand("viz", "Export node/edge attention for one video");
  add_common(vz, viz_common);
  vz->add_option("--checkpoint", viz_ckpt)->required();
  vz->add_option("--data", viz_data, "detection stream containing the video")->required();
  vz->add_option("--video-id", viz_id)->required();
  vz->add_option("--out", viz_out, "export output path")->required();
  vz->add_option("--graph-out", viz_graph_out, "also dump the constructed graph");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_common, gen_out);
    if (tr->parsed()) return cmd_train(train_common, train_data, train_ckpt, train_history);
    if (ev->parsed()) {
      return cmd_eval(eval_common, eval_ckpt, eval_data, eval_val, eval_threshold,
                      eval_threshold_set, eval_out);
    }
    if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_fd_step, gc_tolerance, gc_graphs, gc_min_coords);
    if (sw->parsed()) {
      return cmd_sweep(sweep_common, sweep_axis, sweep_values, sweep_data, sweep_out,
                       sweep_eval_only, sweep_ckpt);
    }
    if (ab->parsed()) return cmd_ablate(abl_common, abl_masks, abl_data, abl_out);
    if (rb->parsed()) return cmd_robustness(rob_common, rob_ckpt, rob_data, rob_levels, rob_out);
    if (vz->parsed()) return cmd_viz(viz_common, viz_ckpt, viz_data, viz_id, viz_out, viz_graph_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "shape error: %s\n", e.what());
    return 4;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
