#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gada/graph.hpp"

namespace gada {

// Edge-aware graph transformer configuration. head_dim is hidden_dim /
// num_heads; node_in_dim must match the graph feature mask it is paired with.
struct ModelConfig {
  int num_layers = 3;
  int num_heads = 4;
  int hidden_dim = 64;
  int phi_hidden = 32;  // hidden width of the edge-aware value network
  int node_in_dim = 3;
  int edge_in_dim = 3;
  // Readout weights are normalized to a distribution over nodes by default;
  // the raw attention-mass weighting is kept for fidelity experiments.
  bool normalize_node_weights = true;

  int head_dim() const { return hidden_dim / num_heads; }
  void validate() const;  // throws ConfigError
};

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
};

// Canonical name -> tensor map. std::map keeps iteration (and checkpoint
// files) in a stable, diff-friendly order.
using TensorMap = std::map<std::string, Tensor>;

struct Parameters {
  TensorMap tensors;
};

// Tensor names and shapes for a config:
//   embed.W [hidden, node_in]   embed.b [hidden]
//   l<i>.Wself [hidden, hidden] l<i>.Wout [hidden, heads*head_dim]  l<i>.bout [hidden]
//   l<i>.h<j>.Wq / .Wk [head_dim, hidden]
//   l<i>.h<j>.phi.W1 [phi_hidden, hidden+edge_in]  .phi.b1 [phi_hidden]
//   l<i>.h<j>.phi.W2 [head_dim, phi_hidden]        .phi.b2 [head_dim]
//   l<i>.h<j>.psi.w [edge_in]                      .psi.b [1]
//   read.w [hidden]             read.b [1]
// with i in 1..num_layers, j in 1..num_heads.
std::map<std::string, std::vector<std::size_t>> tensor_spec(const ModelConfig& cfg);

// Zero tensors congruent with tensor_spec(cfg).
TensorMap zero_tensors(const ModelConfig& cfg);

// Deterministic fan-based uniform init: weights in [-a, a] with
// a = sqrt(6 / (fan_in + fan_out)); bias tensors zero.
Parameters init_params(const ModelConfig& cfg, std::uint64_t seed);

std::size_t param_count(const Parameters& params);

struct GraphOutput {
  std::vector<double> node_scores;  // tanh-bounded, one per node
  // attention[layer][head][edge]: softmax weight of graph.edges[edge],
  // normalized over each destination's incoming edges.
  std::vector<std::vector<std::vector<double>>> attention;
  std::vector<double> node_weights;  // normalized beta, sums to 1 if nonempty
  double graph_logit = -1.0;
  double probability = 0.0;
};

// Pure forward pass. Empty graph: logit fixed at -1. Throws ShapeError when
// graph feature length disagrees with cfg.node_in_dim or a tensor is missing
// or mis-shaped.
GraphOutput forward(const VideoGraph& graph, const Parameters& params, const ModelConfig& cfg);

// Structured-text checkpoint: {"config": {...}, "tensors": {name: {shape, data}}}.
// Round-trips every scalar exactly.
void save_checkpoint(const Parameters& params, const ModelConfig& cfg, const std::string& path);
std::pair<Parameters, ModelConfig> load_checkpoint(const std::string& path);

double sigmoid(double x);

}  // namespace gada
