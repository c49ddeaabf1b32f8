#pragma once

// Internal forward/backward engine of the edge-aware graph transformer.
// model.cpp wraps run_forward for inference; train.cpp adds run_backward.
// Not installed; everything here is an implementation detail behind the
// public forward()/backward() contracts.

#include <cstdint>
#include <vector>

#include "gada/model.hpp"

namespace gada::detail {

struct HeadView {
  const double* wq;     // [d, hidden]
  const double* wk;     // [d, hidden]
  const double* w1;     // [phi_hidden, hidden + edge_in]
  const double* b1;     // [phi_hidden]
  const double* w2;     // [d, phi_hidden]
  const double* b2;     // [d]
  const double* psi_w;  // [edge_in]
  const double* psi_b;  // [1]
};

struct LayerView {
  const double* wself;  // [hidden, hidden]
  const double* wout;   // [hidden, heads * d]
  const double* bout;   // [hidden]
  std::vector<HeadView> heads;
};

struct ParamsView {
  const double* embed_w;
  const double* embed_b;
  const double* read_w;
  const double* read_b;
  std::vector<LayerView> layers;
};

struct MutHeadView {
  double *wq, *wk, *w1, *b1, *w2, *b2, *psi_w, *psi_b;
};

struct MutLayerView {
  double *wself, *wout, *bout;
  std::vector<MutHeadView> heads;
};

struct MutParamsView {
  double *embed_w, *embed_b, *read_w, *read_b;
  std::vector<MutLayerView> layers;
};

// Validate shapes against tensor_spec(cfg) and resolve raw pointers.
// Throws ShapeError naming the first offending tensor.
ParamsView make_view(const Parameters& params, const ModelConfig& cfg);
MutParamsView make_mut_view(TensorMap& tensors, const ModelConfig& cfg);

// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
  const VideoGraph* graph = nullptr;
  int n = 0;  // nodes
  int m = 0;  // directed edges

  // CSR over incoming edges: edge indices for destination v are
  // in_idx[in_ptr[v] .. in_ptr[v+1]).
  std::vector<int> in_ptr;
  std::vector<int> in_idx;
  std::vector<std::uint8_t> has_in;
  // Nodes incident to at least one edge in either direction; only these need
  // Q/K and value-network projections.
  std::vector<int> active;

  std::vector<double> x;                        // n * node_in
  std::vector<std::vector<double>> state;       // L+1 of n*hidden; state[0] = embedding
  std::vector<std::vector<double>> out_pre;     // L of n*hidden, pre-ReLU layer output
  std::vector<std::vector<std::vector<double>>> q;      // [L][H] n*d
  std::vector<std::vector<std::vector<double>>> k;      // [L][H] n*d
  std::vector<std::vector<std::vector<double>>> alpha;  // [L][H] m
  std::vector<std::vector<std::vector<double>>> a1;     // [L][H] m*phi_hidden (post-ReLU)
  std::vector<std::vector<std::vector<double>>> phi;    // [L][H] m*d
  std::vector<std::vector<double>> msg;                 // [L] n*(H*d)

  std::vector<double> scores;     // y_v
  std::vector<double> beta_raw;   // head-mean key-role attention mass
  std::vector<double> beta_norm;  // normalized (or uniform fallback)
  double logit = -1.0;
  double prob = 0.0;
};

void run_forward(const VideoGraph& graph, const ParamsView& pv, const ModelConfig& cfg,
                 ForwardTrace& tr);

struct LossTerms {
  double total = 0.0;
  double node = 0.0;
  double graph = 0.0;
};

LossTerms compute_losses(const ForwardTrace& tr, int video_label);

// Reverse-mode pass of (node MSE + graph BCE); accumulates d(loss)/d(theta)
// into grads (congruent with tensor_spec(cfg)). Returns the loss terms.
LossTerms run_backward(const ForwardTrace& tr, const ParamsView& pv, const ModelConfig& cfg,
                       int video_label, TensorMap& grads);

}  // namespace gada::detail
