#include "gada/model.hpp"

#include <cmath>
#include <fstream>

#include "gada/kernels.hpp"
#include "gada/rng.hpp"
#include "gat_engine.hpp"
#include "json.hpp"

namespace gada {

using nlohmann::json;
namespace kn = gada::kernels;

void ModelConfig::validate() const {
  if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
  if (num_heads < 1) throw ConfigError("num_heads must be >= 1");
  if (hidden_dim < 1 || phi_hidden < 1 || node_in_dim < 1 || edge_in_dim < 1) {
    throw ConfigError("model dimensions must be >= 1");
  }
  if (hidden_dim % num_heads != 0) {
    throw ConfigError("hidden_dim must be divisible by num_heads");
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Tensor naming and initialization
// ---------------------------------------------------------------------------

std::map<std::string, std::vector<std::size_t>> tensor_spec(const ModelConfig& cfg) {
  cfg.validate();
  const auto hidden = static_cast<std::size_t>(cfg.hidden_dim);
  const auto d = static_cast<std::size_t>(cfg.head_dim());
  const auto phi_h = static_cast<std::size_t>(cfg.phi_hidden);
  const auto node_in = static_cast<std::size_t>(cfg.node_in_dim);
  const auto edge_in = static_cast<std::size_t>(cfg.edge_in_dim);

  std::map<std::string, std::vector<std::size_t>> spec;
  spec["embed.W"] = {hidden, node_in};
  spec["embed.b"] = {hidden};
  for (int l = 1; l <= cfg.num_layers; ++l) {
    const std::string lp = "l" + std::to_string(l) + ".";
    spec[lp + "Wself"] = {hidden, hidden};
    spec[lp + "Wout"] = {hidden, static_cast<std::size_t>(cfg.num_heads) * d};
    spec[lp + "bout"] = {hidden};
    for (int h = 1; h <= cfg.num_heads; ++h) {
      const std::string hp = lp + "h" + std::to_string(h) + ".";
      spec[hp + "Wq"] = {d, hidden};
      spec[hp + "Wk"] = {d, hidden};
      spec[hp + "phi.W1"] = {phi_h, hidden + edge_in};
      spec[hp + "phi.b1"] = {phi_h};
      spec[hp + "phi.W2"] = {d, phi_h};
      spec[hp + "phi.b2"] = {d};
      spec[hp + "psi.w"] = {edge_in};
      spec[hp + "psi.b"] = {1};
    }
  }
  spec["read.w"] = {hidden};
  spec["read.b"] = {1};
  return spec;
}

TensorMap zero_tensors(const ModelConfig& cfg) {
  TensorMap out;
  for (const auto& [name, shape] : tensor_spec(cfg)) {
    std::size_t total = 1;
    for (std::size_t s : shape) total *= s;
    out[name] = Tensor{shape, std::vector<double>(total, 0.0)};
  }
  return out;
}

namespace {

bool is_bias(const std::string& name) {
  const auto dotpos = name.rfind('.');
  const std::string leaf = dotpos == std::string::npos ? name : name.substr(dotpos + 1);
  return !leaf.empty() && leaf[0] == 'b';
}

// fan_in/fan_out for the uniform init: matrices are [out, in]; vector-shaped
// weights (read.w, psi.w) map their length to fan_in with fan_out 1.
std::pair<std::size_t, std::size_t> fans(const std::vector<std::size_t>& shape) {
  if (shape.size() == 2) return {shape[1], shape[0]};
  return {shape.empty() ? 1 : shape[0], 1};
}

}  // namespace

Parameters init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Parameters p;
  p.tensors = zero_tensors(cfg);
  Rng rng(seed);
  for (auto& [name, tensor] : p.tensors) {
    if (is_bias(name)) continue;  // biases stay zero
    const auto [fan_in, fan_out] = fans(tensor.shape);
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : tensor.data) v = rng.uniform(-a, a);
  }
  return p;
}

std::size_t param_count(const Parameters& params) {
  std::size_t total = 0;
  for (const auto& [name, tensor] : params.tensors) total += tensor.size();
  return total;
}

// ---------------------------------------------------------------------------
// Parameter views
// ---------------------------------------------------------------------------

namespace detail {

namespace {

template <typename Map>
auto* resolve(Map& tensors, const std::string& name, const std::vector<std::size_t>& shape) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ShapeError("tensor '" + name + "' missing");
  if (it->second.shape != shape) {
    auto fmt = [](const std::vector<std::size_t>& s) {
      std::string out = "[";
      for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
      return out + "]";
    };
    throw ShapeError("tensor '" + name + "' shape mismatch: expected " + fmt(shape) + " got " +
                     fmt(it->second.shape));
  }
  return it->second.data.data();
}

template <typename Map, typename PV>
void fill_view(Map& tensors, const ModelConfig& cfg, PV& view) {
  const auto spec = tensor_spec(cfg);
  auto at = [&](const std::string& name) { return resolve(tensors, name, spec.at(name)); };
  view.embed_w = at("embed.W");
  view.embed_b = at("embed.b");
  view.read_w = at("read.w");
  view.read_b = at("read.b");
  view.layers.resize(cfg.num_layers);
  for (int l = 1; l <= cfg.num_layers; ++l) {
    auto& lv = view.layers[l - 1];
    const std::string lp = "l" + std::to_string(l) + ".";
    lv.wself = at(lp + "Wself");
    lv.wout = at(lp + "Wout");
    lv.bout = at(lp + "bout");
    lv.heads.resize(cfg.num_heads);
    for (int h = 1; h <= cfg.num_heads; ++h) {
      auto& hv = lv.heads[h - 1];
      const std::string hp = lp + "h" + std::to_string(h) + ".";
      hv.wq = at(hp + "Wq");
      hv.wk = at(hp + "Wk");
      hv.w1 = at(hp + "phi.W1");
      hv.b1 = at(hp + "phi.b1");
      hv.w2 = at(hp + "phi.W2");
      hv.b2 = at(hp + "phi.b2");
      hv.psi_w = at(hp + "psi.w");
      hv.psi_b = at(hp + "psi.b");
    }
  }
  // Also fail on unexpected extras so a checkpoint/config mismatch cannot
  // silently carry dead tensors.
  for (const auto& [name, tensor] : tensors) {
    if (spec.find(name) == spec.end()) throw ShapeError("unexpected tensor '" + name + "'");
  }
}

}  // namespace

ParamsView make_view(const Parameters& params, const ModelConfig& cfg) {
  ParamsView v;
  fill_view(params.tensors, cfg, v);
  return v;
}

MutParamsView make_mut_view(TensorMap& tensors, const ModelConfig& cfg) {
  MutParamsView v;
  fill_view(tensors, cfg, v);
  return v;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

void run_forward(const VideoGraph& graph, const ParamsView& pv, const ModelConfig& cfg,
                 ForwardTrace& tr) {
  const int n = static_cast<int>(graph.nodes.size());
  const int m = static_cast<int>(graph.edges.size());
  const int hidden = cfg.hidden_dim;
  const int H = cfg.num_heads;
  const int d = cfg.head_dim();
  const int L = cfg.num_layers;
  const int phi_h = cfg.phi_hidden;
  const int F = cfg.node_in_dim;
  const int Fe = cfg.edge_in_dim;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  tr.graph = &graph;
  tr.n = n;
  tr.m = m;

  for (const Node& node : graph.nodes) {
    if (static_cast<int>(node.features.size()) != F) {
      throw ShapeError("node feature length " + std::to_string(node.features.size()) +
                       " does not match model node_in_dim " + std::to_string(F));
    }
  }

  // Incoming-edge CSR, in edge-list order per destination.
  tr.in_ptr.assign(n + 1, 0);
  tr.in_idx.resize(m);
  tr.has_in.assign(n, 0);
  for (const Edge& e : graph.edges) ++tr.in_ptr[e.dst + 1];
  for (int v = 0; v < n; ++v) tr.in_ptr[v + 1] += tr.in_ptr[v];
  {
    std::vector<int> cursor(tr.in_ptr.begin(), tr.in_ptr.end() - 1);
    for (int e = 0; e < m; ++e) tr.in_idx[cursor[graph.edges[e].dst]++] = e;
  }
  for (int v = 0; v < n; ++v) tr.has_in[v] = tr.in_ptr[v + 1] > tr.in_ptr[v];
  tr.active.clear();
  {
    std::vector<std::uint8_t> incident(n, 0);
    for (const Edge& e : graph.edges) {
      incident[e.src] = 1;
      incident[e.dst] = 1;
    }
    for (int v = 0; v < n; ++v) {
      if (incident[v]) tr.active.push_back(v);
    }
  }

  tr.x.resize(static_cast<std::size_t>(n) * F);
  for (int v = 0; v < n; ++v) {
    for (int f = 0; f < F; ++f) tr.x[static_cast<std::size_t>(v) * F + f] = graph.nodes[v].features[f];
  }

  tr.state.assign(L + 1, {});
  tr.out_pre.assign(L, {});
  tr.q.assign(L, std::vector<std::vector<double>>(H));
  tr.k.assign(L, std::vector<std::vector<double>>(H));
  tr.alpha.assign(L, std::vector<std::vector<double>>(H));
  tr.a1.assign(L, std::vector<std::vector<double>>(H));
  tr.phi.assign(L, std::vector<std::vector<double>>(H));
  tr.msg.assign(L, {});

  tr.scores.assign(n, 0.0);
  tr.beta_raw.assign(n, 0.0);
  tr.beta_norm.assign(n, 0.0);

  if (n == 0) {
    tr.logit = -1.0;
    tr.prob = sigmoid(tr.logit);
    return;
  }

  // Embedding.
  auto& h0 = tr.state[0];
  h0.resize(static_cast<std::size_t>(n) * hidden);
  for (int v = 0; v < n; ++v) {
    double* hv = h0.data() + static_cast<std::size_t>(v) * hidden;
    kn::matvec(pv.embed_w, tr.x.data() + static_cast<std::size_t>(v) * F, hv, hidden, F);
    kn::axpy(1.0, pv.embed_b, hv, hidden);
  }

  std::vector<double> w1_edge_t(static_cast<std::size_t>(Fe) * phi_h);
  std::vector<double> p1(static_cast<std::size_t>(n) * phi_h);  // per-head node part of phi
  const int w1_cols = hidden + Fe;

  for (int l = 0; l < L; ++l) {
    const LayerView& lv = pv.layers[l];
    const std::vector<double>& S = tr.state[l];
    auto& msg = tr.msg[l];
    msg.assign(static_cast<std::size_t>(n) * H * d, 0.0);

    for (int h = 0; h < H; ++h) {
      const HeadView& hv = lv.heads[h];
      auto& q = tr.q[l][h];
      auto& k = tr.k[l][h];
      auto& alpha = tr.alpha[l][h];
      auto& a1 = tr.a1[l][h];
      auto& phi = tr.phi[l][h];
      q.resize(static_cast<std::size_t>(n) * d);
      k.resize(static_cast<std::size_t>(n) * d);
      alpha.resize(m);
      a1.resize(static_cast<std::size_t>(m) * phi_h);
      phi.resize(static_cast<std::size_t>(m) * d);

      // One pass per projection keeps each weight tensor hot in cache.
      for (int v : tr.active) {
        kn::matvec(hv.wq, S.data() + static_cast<std::size_t>(v) * hidden,
                   q.data() + static_cast<std::size_t>(v) * d, d, hidden);
      }
      for (int v : tr.active) {
        kn::matvec(hv.wk, S.data() + static_cast<std::size_t>(v) * hidden,
                   k.data() + static_cast<std::size_t>(v) * d, d, hidden);
      }
      // Node-dependent part of phi's first layer (W1 columns [0, hidden)),
      // with b1 baked in.
      for (int v : tr.active) {
        const double* sv = S.data() + static_cast<std::size_t>(v) * hidden;
        double* pv1 = p1.data() + static_cast<std::size_t>(v) * phi_h;
        for (int r = 0; r < phi_h; ++r) {
          pv1[r] = hv.b1[r] + kn::dot(hv.w1 + static_cast<std::size_t>(r) * w1_cols, sv, hidden);
        }
      }
      // W1's edge columns, transposed to contiguous rows for the edge loops.
      for (int j = 0; j < Fe; ++j) {
        for (int r = 0; r < phi_h; ++r) {
          w1_edge_t[static_cast<std::size_t>(j) * phi_h + r] =
              hv.w1[static_cast<std::size_t>(r) * w1_cols + hidden + j];
        }
      }

      // Attention logits. psi's bias shifts every incoming logit of a
      // destination by the same constant, which the softmax cancels exactly,
      // so it is left out of the sum.
      for (int e = 0; e < m; ++e) {
        const Edge& edge = graph.edges[e];
        double s = kn::dot(q.data() + static_cast<std::size_t>(edge.dst) * d,
                           k.data() + static_cast<std::size_t>(edge.src) * d, d) *
                   inv_sqrt_d;
        s += kn::dot(hv.psi_w, edge.features.data(), Fe);
        alpha[e] = s;
      }

      // Stable softmax over each destination's incoming edges.
      for (int v = 0; v < n; ++v) {
        const int begin = tr.in_ptr[v], end = tr.in_ptr[v + 1];
        if (begin == end) continue;
        double mx = alpha[tr.in_idx[begin]];
        for (int i = begin + 1; i < end; ++i) mx = std::max(mx, alpha[tr.in_idx[i]]);
        double sum = 0.0;
        for (int i = begin; i < end; ++i) {
          double& a = alpha[tr.in_idx[i]];
          a = std::exp(a - mx);
          sum += a;
        }
        for (int i = begin; i < end; ++i) alpha[tr.in_idx[i]] /= sum;
      }

      // Messages: phi(h_src, e) = W2 relu(W1 [h_src; e] + b1) + b2, weighted
      // by attention. a1 and phi are kept for the backward pass.
      for (int e = 0; e < m; ++e) {
        const Edge& edge = graph.edges[e];
        const double* ef = edge.features.data();
        const double* p1u = p1.data() + static_cast<std::size_t>(edge.src) * phi_h;
        double* a1e = a1.data() + static_cast<std::size_t>(e) * phi_h;
        std::copy(p1u, p1u + phi_h, a1e);
        for (int j = 0; j < Fe; ++j) {
          kn::axpy(ef[j], w1_edge_t.data() + static_cast<std::size_t>(j) * phi_h, a1e, phi_h);
        }
        for (int r = 0; r < phi_h; ++r) a1e[r] = a1e[r] > 0.0 ? a1e[r] : 0.0;
        double* phie = phi.data() + static_cast<std::size_t>(e) * d;
        kn::matvec(hv.w2, a1e, phie, d, phi_h);
        kn::axpy(1.0, hv.b2, phie, d);
        kn::axpy(alpha[e], phie,
                 msg.data() + (static_cast<std::size_t>(edge.dst) * H + h) * d, d);
      }
    }

    // Node update. Destinations with no incoming edges pass through unchanged;
    // the inter-layer ReLU still applies uniformly.
    auto& out = tr.out_pre[l];
    out.resize(static_cast<std::size_t>(n) * hidden);
    for (int v = 0; v < n; ++v) {
      const double* sv = S.data() + static_cast<std::size_t>(v) * hidden;
      double* ov = out.data() + static_cast<std::size_t>(v) * hidden;
      if (tr.has_in[v]) {
        kn::matvec(lv.wself, sv, ov, hidden, hidden);
        kn::matvec_add(lv.wout, msg.data() + static_cast<std::size_t>(v) * H * d, ov, hidden,
                       static_cast<std::size_t>(H) * d);
        kn::axpy(1.0, lv.bout, ov, hidden);
      } else {
        std::copy(sv, sv + hidden, ov);
      }
    }
    auto& next = tr.state[l + 1];
    next = out;
    if (l < L - 1) {
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    }
  }

  // Readout.
  const std::vector<double>& hl = tr.state[L];
  for (int v = 0; v < n; ++v) {
    tr.scores[v] =
        std::tanh(kn::dot(pv.read_w, hl.data() + static_cast<std::size_t>(v) * hidden, hidden) +
                  pv.read_b[0]);
  }

  // Node weight: head-mean attention mass the node receives in the key role
  // at the final layer, normalized to a distribution (uniform when edgeless).
  if (m > 0) {
    for (int h = 0; h < H; ++h) {
      const auto& alpha = tr.alpha[L - 1][h];
      for (int e = 0; e < m; ++e) tr.beta_raw[graph.edges[e].src] += alpha[e];
    }
    double sum = 0.0;
    for (int v = 0; v < n; ++v) {
      tr.beta_raw[v] /= H;
      sum += tr.beta_raw[v];
    }
    if (cfg.normalize_node_weights) {
      for (int v = 0; v < n; ++v) tr.beta_norm[v] = tr.beta_raw[v] / sum;
    } else {
      tr.beta_norm = tr.beta_raw;
    }
  } else {
    const double u = 1.0 / n;
    for (int v = 0; v < n; ++v) {
      tr.beta_raw[v] = u;
      tr.beta_norm[v] = u;
    }
  }

  tr.logit = kn::dot(tr.beta_norm.data(), tr.scores.data(), n);
  tr.prob = sigmoid(tr.logit);
}

}  // namespace detail

GraphOutput forward(const VideoGraph& graph, const Parameters& params, const ModelConfig& cfg) {
  const detail::ParamsView pv = detail::make_view(params, cfg);
  detail::ForwardTrace tr;
  detail::run_forward(graph, pv, cfg, tr);
  GraphOutput out;
  out.node_scores = tr.scores;
  out.attention = tr.alpha;
  out.node_weights = tr.beta_norm;
  out.graph_logit = tr.logit;
  out.probability = tr.prob;
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

json config_to_json(const ModelConfig& cfg) {
  return {{"num_layers", cfg.num_layers},
          {"num_heads", cfg.num_heads},
          {"hidden_dim", cfg.hidden_dim},
          {"phi_hidden", cfg.phi_hidden},
          {"node_in_dim", cfg.node_in_dim},
          {"edge_in_dim", cfg.edge_in_dim},
          {"normalize_node_weights", cfg.normalize_node_weights}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.num_layers = j.at("num_layers").get<int>();
  cfg.num_heads = j.at("num_heads").get<int>();
  cfg.hidden_dim = j.at("hidden_dim").get<int>();
  cfg.phi_hidden = j.at("phi_hidden").get<int>();
  cfg.node_in_dim = j.at("node_in_dim").get<int>();
  cfg.edge_in_dim = j.at("edge_in_dim").get<int>();
  cfg.normalize_node_weights = j.at("normalize_node_weights").get<bool>();
  cfg.validate();
  return cfg;
}

}  // namespace

void save_checkpoint(const Parameters& params, const ModelConfig& cfg, const std::string& path) {
  json tensors;
  for (const auto& [name, tensor] : params.tensors) {
    tensors[name] = {{"shape", tensor.shape}, {"data", tensor.data}};
  }
  json j = {{"config", config_to_json(cfg)}, {"tensors", std::move(tensors)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << j.dump() << '\n';
  if (!out) throw IoError("write failure on checkpoint: " + path);
}

std::pair<Parameters, ModelConfig> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("unparseable checkpoint '" + path + "': " + e.what());
  }
  if (!j.is_object() || !j.contains("config") || !j.contains("tensors")) {
    throw FormatError("checkpoint '" + path + "' missing config/tensors");
  }
  ModelConfig cfg;
  try {
    cfg = config_from_json(j["config"]);
  } catch (const json::exception& e) {
    throw FormatError("checkpoint '" + path + "' has a malformed config: " + e.what());
  }

  Parameters params;
  const auto spec = tensor_spec(cfg);
  for (auto it = j["tensors"].begin(); it != j["tensors"].end(); ++it) {
    const std::string& name = it.key();
    if (spec.find(name) == spec.end()) {
      throw ShapeError("checkpoint tensor '" + name + "' not part of the declared config");
    }
    Tensor t;
    try {
      t.shape = it.value().at("shape").get<std::vector<std::size_t>>();
      t.data = it.value().at("data").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw FormatError("checkpoint tensor '" + name + "' is malformed: " + e.what());
    }
    std::size_t total = 1;
    for (std::size_t s : t.shape) total *= s;
    if (t.shape != spec.at(name) || t.data.size() != total) {
      throw ShapeError("checkpoint tensor '" + name + "' shape mismatch");
    }
    params.tensors[name] = std::move(t);
  }
  for (const auto& [name, shape] : spec) {
    if (params.tensors.find(name) == params.tensors.end()) {
      throw ShapeError("checkpoint missing tensor '" + name + "'");
    }
  }
  return {std::move(params), cfg};
}

}  // namespace gada
