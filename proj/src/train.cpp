#include "gada/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "gada/kernels.hpp"
#include "gada/metrics.hpp"
#include "gada/rng.hpp"
#include "gat_engine.hpp"
#include "json.hpp"

namespace gada {

namespace kn = gada::kernels;
using detail::ForwardTrace;
using detail::LossTerms;
using detail::MutParamsView;
using detail::ParamsView;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2 || batch_size % 2 != 0) throw ConfigError("batch_size must be even and >= 2");
  if (regen_interval < 1) throw ConfigError("regen_interval must be >= 1");
  if (warmup_exclusion < 0) throw ConfigError("warmup_exclusion must be >= 0");
  if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must be in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

double node_loss(const std::vector<double>& node_scores, const std::vector<int>& node_labels) {
  if (node_scores.size() != node_labels.size()) {
    throw ShapeError("node_loss: score/label length mismatch");
  }
  if (node_scores.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < node_scores.size(); ++i) {
    const double diff = static_cast<double>(node_labels[i]) - node_scores[i];
    acc += diff * diff;
  }
  return acc / static_cast<double>(node_scores.size());
}

double graph_loss(double graph_logit, int video_label) {
  // max(z,0) - z*y + log(1 + exp(-|z|))
  const double z = graph_logit;
  const double y = static_cast<double>(video_label);
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

namespace detail {

LossTerms compute_losses(const ForwardTrace& tr, int video_label) {
  LossTerms out;
  if (tr.n > 0) {
    double acc = 0.0;
    for (int v = 0; v < tr.n; ++v) {
      const double diff = static_cast<double>(tr.graph->nodes[v].label) - tr.scores[v];
      acc += diff * diff;
    }
    out.node = acc / tr.n;
  }
  out.graph = graph_loss(tr.logit, video_label);
  out.total = out.node + out.graph;
  return out;
}

LossTerms run_backward(const ForwardTrace& tr, const ParamsView& pv, const ModelConfig& cfg,
                       int video_label, TensorMap& grads) {
  const LossTerms losses = compute_losses(tr, video_label);
  const int n = tr.n;
  const int m = tr.m;
  if (n == 0) return losses;  // constant logit: no gradient anywhere

  MutParamsView gv = detail::make_mut_view(grads, cfg);
  const VideoGraph& graph = *tr.graph;
  const int hidden = cfg.hidden_dim;
  const int H = cfg.num_heads;
  const int d = cfg.head_dim();
  const int L = cfg.num_layers;
  const int phi_h = cfg.phi_hidden;
  const int F = cfg.node_in_dim;
  const int Fe = cfg.edge_in_dim;
  const int w1_cols = hidden + Fe;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  const double dlogit = tr.prob - static_cast<double>(video_label);

  // d(loss)/d(score_v): graph readout path plus the node MSE term.
  std::vector<double> dy(n);
  for (int v = 0; v < n; ++v) {
    dy[v] = dlogit * tr.beta_norm[v] +
            2.0 * (tr.scores[v] - static_cast<double>(graph.nodes[v].label)) / n;
  }

  // Node-weight path: gradient w.r.t. the raw key-role attention mass.
  // The edgeless uniform fallback is constant and contributes nothing.
  std::vector<double> dbeta(n, 0.0);
  if (m > 0) {
    if (cfg.normalize_node_weights) {
      double total = 0.0;
      for (int v = 0; v < n; ++v) total += tr.beta_raw[v];
      double inner = 0.0;
      for (int v = 0; v < n; ++v) inner += dlogit * tr.scores[v] * tr.beta_norm[v];
      for (int v = 0; v < n; ++v) dbeta[v] = (dlogit * tr.scores[v] - inner) / total;
    } else {
      for (int v = 0; v < n; ++v) dbeta[v] = dlogit * tr.scores[v];
    }
  }

  // Readout backward.
  std::vector<double> dstate(static_cast<std::size_t>(n) * hidden, 0.0);
  const std::vector<double>& hl = tr.state[L];
  for (int v = 0; v < n; ++v) {
    const double pre = dy[v] * (1.0 - tr.scores[v] * tr.scores[v]);
    kn::axpy(pre, hl.data() + static_cast<std::size_t>(v) * hidden, gv.read_w, hidden);
    gv.read_b[0] += pre;
    kn::axpy(pre, pv.read_w, dstate.data() + static_cast<std::size_t>(v) * hidden, hidden);
  }

  std::vector<double> dprev(static_cast<std::size_t>(n) * hidden);
  std::vector<double> dmsg(static_cast<std::size_t>(n) * H * d);
  std::vector<double> dalpha(m);
  std::vector<double> dq(static_cast<std::size_t>(n) * d);
  std::vector<double> dk(static_cast<std::size_t>(n) * d);
  std::vector<double> dp1(static_cast<std::size_t>(n) * phi_h);
  std::vector<double> dphi(d);
  std::vector<double> da1(phi_h);
  std::vector<double> dw1_edge(static_cast<std::size_t>(Fe) * phi_h);

  for (int l = L - 1; l >= 0; --l) {
    const LayerView& lv = pv.layers[l];
    MutLayerView& glv = gv.layers[l];
    const std::vector<double>& S = tr.state[l];
    const std::vector<double>& out = tr.out_pre[l];
    const std::vector<double>& msg = tr.msg[l];

    // Inter-layer ReLU backward (layers below the last only).
    if (l < L - 1) {
      for (std::size_t i = 0; i < dstate.size(); ++i) {
        if (out[i] <= 0.0) dstate[i] = 0.0;
      }
    }

    std::fill(dprev.begin(), dprev.end(), 0.0);
    std::fill(dmsg.begin(), dmsg.end(), 0.0);

    // Combine backward, one tensor-sized pass at a time for cache locality.
    for (int v = 0; v < n; ++v) {
      const double* dout_v = dstate.data() + static_cast<std::size_t>(v) * hidden;
      if (tr.has_in[v]) {
        kn::axpy(1.0, dout_v, glv.bout, hidden);
      } else {
        kn::axpy(1.0, dout_v, dprev.data() + static_cast<std::size_t>(v) * hidden, hidden);
      }
    }
    for (int v = 0; v < n; ++v) {
      if (!tr.has_in[v]) continue;
      kn::add_outer(glv.wself, dstate.data() + static_cast<std::size_t>(v) * hidden,
                    S.data() + static_cast<std::size_t>(v) * hidden, hidden, hidden);
    }
    for (int v = 0; v < n; ++v) {
      if (!tr.has_in[v]) continue;
      kn::matvec_t_add(lv.wself, dstate.data() + static_cast<std::size_t>(v) * hidden,
                       dprev.data() + static_cast<std::size_t>(v) * hidden, hidden, hidden);
    }
    for (int v = 0; v < n; ++v) {
      if (!tr.has_in[v]) continue;
      kn::add_outer(glv.wout, dstate.data() + static_cast<std::size_t>(v) * hidden,
                    msg.data() + static_cast<std::size_t>(v) * H * d, hidden,
                    static_cast<std::size_t>(H) * d);
    }
    for (int v = 0; v < n; ++v) {
      if (!tr.has_in[v]) continue;
      kn::matvec_t_add(lv.wout, dstate.data() + static_cast<std::size_t>(v) * hidden,
                       dmsg.data() + static_cast<std::size_t>(v) * H * d, hidden,
                       static_cast<std::size_t>(H) * d);
    }

    for (int h = 0; h < H; ++h) {
      const HeadView& hv = lv.heads[h];
      MutHeadView& ghv = glv.heads[h];
      const std::vector<double>& alpha = tr.alpha[l][h];
      const std::vector<double>& a1 = tr.a1[l][h];
      const std::vector<double>& phi = tr.phi[l][h];
      const std::vector<double>& q = tr.q[l][h];
      const std::vector<double>& k = tr.k[l][h];

      std::fill(dalpha.begin(), dalpha.end(), 0.0);
      std::fill(dq.begin(), dq.end(), 0.0);
      std::fill(dk.begin(), dk.end(), 0.0);
      std::fill(dp1.begin(), dp1.end(), 0.0);
      std::fill(dw1_edge.begin(), dw1_edge.end(), 0.0);

      // beta is read off the final layer's attention.
      if (l == L - 1 && m > 0) {
        for (int e = 0; e < m; ++e) dalpha[e] = dbeta[graph.edges[e].src] / H;
      }

      for (int e = 0; e < m; ++e) {
        const Edge& edge = graph.edges[e];
        const double* ef = edge.features.data();
        const double* dm_v = dmsg.data() + (static_cast<std::size_t>(edge.dst) * H + h) * d;
        const double* a1_e = a1.data() + static_cast<std::size_t>(e) * phi_h;

        dalpha[e] += kn::dot(dm_v, phi.data() + static_cast<std::size_t>(e) * d, d);

        // Message value path: dphi = alpha_e * dm_v.
        for (int j = 0; j < d; ++j) dphi[j] = alpha[e] * dm_v[j];
        kn::add_outer(ghv.w2, dphi.data(), a1_e, d, phi_h);
        kn::axpy(1.0, dphi.data(), ghv.b2, d);
        std::fill(da1.begin(), da1.end(), 0.0);
        kn::matvec_t_add(hv.w2, dphi.data(), da1.data(), d, phi_h);
        // da1 -> dz1 through the ReLU recorded in a1.
        for (int r = 0; r < phi_h; ++r) {
          if (a1_e[r] <= 0.0) da1[r] = 0.0;
        }
        kn::axpy(1.0, da1.data(), ghv.b1, phi_h);
        // W1's edge columns accumulate in a contiguous scratch, scattered to
        // the strided gradient rows once per head.
        for (int j = 0; j < Fe; ++j) {
          kn::axpy(ef[j], da1.data(), dw1_edge.data() + static_cast<std::size_t>(j) * phi_h,
                   phi_h);
        }
        kn::axpy(1.0, da1.data(), dp1.data() + static_cast<std::size_t>(edge.src) * phi_h,
                 phi_h);
      }
      for (int j = 0; j < Fe; ++j) {
        for (int r = 0; r < phi_h; ++r) {
          ghv.w1[static_cast<std::size_t>(r) * w1_cols + hidden + j] +=
              dw1_edge[static_cast<std::size_t>(j) * phi_h + r];
        }
      }

      // Softmax backward per destination; overwrites dalpha with ds.
      for (int v = 0; v < n; ++v) {
        const int begin = tr.in_ptr[v], end = tr.in_ptr[v + 1];
        if (begin == end) continue;
        double common = 0.0;
        for (int i = begin; i < end; ++i) {
          const int e = tr.in_idx[i];
          common += dalpha[e] * alpha[e];
        }
        for (int i = begin; i < end; ++i) {
          const int e = tr.in_idx[i];
          dalpha[e] = alpha[e] * (dalpha[e] - common);
        }
      }

      // Attention-logit backward. psi's bias cancels in the softmax, so its
      // gradient is identically zero and is not accumulated.
      for (int e = 0; e < m; ++e) {
        const double ds = dalpha[e];
        if (ds == 0.0) continue;
        const Edge& edge = graph.edges[e];
        const double* ef = edge.features.data();
        kn::axpy(ds * inv_sqrt_d, k.data() + static_cast<std::size_t>(edge.src) * d,
                 dq.data() + static_cast<std::size_t>(edge.dst) * d, d);
        kn::axpy(ds * inv_sqrt_d, q.data() + static_cast<std::size_t>(edge.dst) * d,
                 dk.data() + static_cast<std::size_t>(edge.src) * d, d);
        for (int j = 0; j < Fe; ++j) ghv.psi_w[j] += ds * ef[j];
      }

      // Per-node wrap-ups into parameter and input-state gradients, one
      // tensor-sized pass at a time. Inactive nodes carry no attention or
      // value gradients.
      for (int v : tr.active) {
        kn::add_outer(ghv.wq, dq.data() + static_cast<std::size_t>(v) * d,
                      S.data() + static_cast<std::size_t>(v) * hidden, d, hidden);
      }
      for (int v : tr.active) {
        kn::matvec_t_add(hv.wq, dq.data() + static_cast<std::size_t>(v) * d,
                         dprev.data() + static_cast<std::size_t>(v) * hidden, d, hidden);
      }
      for (int v : tr.active) {
        kn::add_outer(ghv.wk, dk.data() + static_cast<std::size_t>(v) * d,
                      S.data() + static_cast<std::size_t>(v) * hidden, d, hidden);
      }
      for (int v : tr.active) {
        kn::matvec_t_add(hv.wk, dk.data() + static_cast<std::size_t>(v) * d,
                         dprev.data() + static_cast<std::size_t>(v) * hidden, d, hidden);
      }
      for (int v : tr.active) {
        const double* sv = S.data() + static_cast<std::size_t>(v) * hidden;
        double* dprev_v = dprev.data() + static_cast<std::size_t>(v) * hidden;
        const double* dp1_v = dp1.data() + static_cast<std::size_t>(v) * phi_h;
        for (int r = 0; r < phi_h; ++r) {
          const double g = dp1_v[r];
          if (g == 0.0) continue;
          kn::axpy(g, sv, ghv.w1 + static_cast<std::size_t>(r) * w1_cols, hidden);
          kn::axpy(g, hv.w1 + static_cast<std::size_t>(r) * w1_cols, dprev_v, hidden);
        }
      }
    }

    std::swap(dstate, dprev);
  }

  // Embedding backward.
  for (int v = 0; v < n; ++v) {
    const double* dh = dstate.data() + static_cast<std::size_t>(v) * hidden;
    kn::add_outer(gv.embed_w, dh, tr.x.data() + static_cast<std::size_t>(v) * F, hidden, F);
    kn::axpy(1.0, dh, gv.embed_b, hidden);
  }

  return losses;
}

}  // namespace detail

LossBreakdown total_loss(const VideoGraph& graph, const Parameters& params,
                         const ModelConfig& cfg) {
  const ParamsView pv = detail::make_view(params, cfg);
  ForwardTrace tr;
  detail::run_forward(graph, pv, cfg, tr);
  const LossTerms t = detail::compute_losses(tr, graph.label);
  return {t.total, t.node, t.graph};
}

TensorMap backward(const VideoGraph& graph, const Parameters& params, const ModelConfig& cfg,
                   LossBreakdown* loss) {
  const ParamsView pv = detail::make_view(params, cfg);
  ForwardTrace tr;
  detail::run_forward(graph, pv, cfg, tr);
  TensorMap grads = zero_tensors(cfg);
  const LossTerms t = detail::run_backward(tr, pv, cfg, graph.label, grads);
  if (loss != nullptr) *loss = {t.total, t.node, t.graph};
  return grads;
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

GradCheckResult grad_check(const VideoGraph& graph, const Parameters& params,
                           const ModelConfig& cfg, double fd_step, double tolerance,
                           std::uint64_t seed, std::size_t min_coords,
                           const TensorMap* injected) {
  if (!(fd_step > 0.0)) throw ConfigError("fd_step must be > 0");
  const TensorMap analytic = injected != nullptr ? *injected : backward(graph, params, cfg);

  GradCheckResult result;
  result.tolerance = tolerance;

  Parameters work = params;
  Rng rng(seed);
  const std::size_t n_tensors = analytic.size();
  const std::size_t per_tensor =
      std::max<std::size_t>(2, (min_coords + n_tensors - 1) / n_tensors);

  const double base_loss = total_loss(graph, params, cfg).total;
  constexpr double kEps = 2.220446049250313e-16;

  auto fd_at = [&](Tensor& wt, std::size_t idx, double h) {
    const double saved = wt.data[idx];
    wt.data[idx] = saved + h;
    const double loss_plus = total_loss(graph, work, cfg).total;
    wt.data[idx] = saved - h;
    const double loss_minus = total_loss(graph, work, cfg).total;
    wt.data[idx] = saved;
    return (loss_plus - loss_minus) / (2.0 * h);
  };
  // Central differences cannot resolve disagreements below the rounding noise
  // of two loss evaluations divided by the step; agreement within that floor
  // counts as exact.
  auto rel_of = [&](double ga, double fd, double h) {
    const double noise = 16.0 * kEps * std::max(1.0, std::abs(base_loss)) / (2.0 * h);
    if (std::abs(ga - fd) <= noise) return 0.0;
    return std::abs(ga - fd) / std::max(1e-8, std::abs(ga) + std::abs(fd));
  };

  for (const auto& [name, gt] : analytic) {
    Tensor& wt = work.tensors.at(name);
    // Coordinates are drawn from the tensor's top magnitude quartile; entries
    // whose true gradient sits near the noise floor are uninformative, the
    // large ones are where a wrong formula would show.
    std::vector<std::size_t> ranked(wt.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i] = i;
    std::sort(ranked.begin(), ranked.end(), [&gt](std::size_t a, std::size_t b) {
      const double ma = std::abs(gt.data[a]), mb = std::abs(gt.data[b]);
      return ma != mb ? ma > mb : a < b;
    });
    const std::size_t take = std::min(per_tensor, wt.size());
    const std::size_t bucket = std::max(take, wt.size() / 4);
    for (std::size_t s = 0; s < take; ++s) {
      // The largest-magnitude entry is always checked; the rest of the sample
      // is a seeded partial shuffle of the bucket.
      if (s > 0) {
        const std::size_t pick =
            s + static_cast<std::size_t>(rng.uniform() * static_cast<double>(bucket - s)) %
                    (bucket - s);
        std::swap(ranked[s], ranked[pick]);
      }
      const std::size_t idx = ranked[s];
      const double ga = gt.data[idx];

      double fd = fd_at(wt, idx, fd_step);
      double rel = rel_of(ga, fd, fd_step);
      // A flagged coordinate is re-verified at smaller steps: a ReLU kink
      // inside the original interval is a difference artifact and vanishes,
      // a wrong analytic gradient stays wrong at every step.
      for (double h = fd_step / 10.0; rel > tolerance && h >= fd_step / 100.0; h /= 10.0) {
        const double fd_refined = fd_at(wt, idx, h);
        const double rel_refined = rel_of(ga, fd_refined, h);
        if (rel_refined < rel) {
          rel = rel_refined;
          fd = fd_refined;
        }
      }

      ++result.coords_checked;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_tensor = name;
        result.worst_index = idx;
        result.worst_analytic = ga;
        result.worst_fd = fd;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState make_adam_state(const ModelConfig& cfg) {
  AdamState s;
  s.m = zero_tensors(cfg);
  s.v = zero_tensors(cfg);
  s.step = 0;
  return s;
}

void adam_step(Parameters& params, const TensorMap& grads, AdamState& state,
               const TrainConfig& cfg) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  for (auto& [name, tensor] : params.tensors) {
    auto git = grads.find(name);
    if (git == grads.end() || git->second.size() != tensor.size()) {
      throw ShapeError("adam_step: gradient tensor '" + name + "' missing or mis-shaped");
    }
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    const double* g = git->second.data.data();
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      m.data[i] = cfg.adam_beta1 * m.data[i] + (1.0 - cfg.adam_beta1) * g[i];
      v.data[i] = cfg.adam_beta2 * v.data[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      tensor.data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

// Seed streams under tcfg.seed. Regen k uses stream kSeedRegenBase + k.
constexpr std::uint64_t kSeedInit = 0;
constexpr std::uint64_t kSeedSampler = 1;
constexpr std::uint64_t kSeedRegenBase = 100;

struct GraphSlot {
  TensorMap grads;
  LossTerms losses;
};

double score_val_auc(const std::vector<VideoGraph>& val_graphs, const std::vector<int>& labels,
                     const Parameters& params, const ModelConfig& cfg) {
  const ParamsView pv = detail::make_view(params, cfg);
  ForwardTrace tr;
  std::vector<ScoredVideo> scored(val_graphs.size());
  for (std::size_t i = 0; i < val_graphs.size(); ++i) {
    detail::run_forward(val_graphs[i], pv, cfg, tr);
    scored[i] = {val_graphs[i].video_id, labels[i], tr.prob, -1};
  }
  return auc(scored);
}

// k uniform picks without replacement when possible, else with replacement.
std::vector<int> sample_class(const std::vector<int>& pool, int k, Rng& rng) {
  std::vector<int> out;
  out.reserve(k);
  if (static_cast<int>(pool.size()) >= k) {
    std::vector<int> idx = pool;
    for (int i = 0; i < k; ++i) {
      const int j = rng.uniform_int(i, static_cast<int>(idx.size()) - 1);
      std::swap(idx[i], idx[j]);
      out.push_back(idx[i]);
    }
  } else {
    for (int i = 0; i < k; ++i) {
      out.push_back(pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)]);
    }
  }
  return out;
}

}  // namespace

TrainResult train(const Dataset& train_data, const Dataset& val_data, const GraphConfig& gcfg,
                  const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const std::vector<PerturbConfig>& noise_schedule,
                  const std::function<void(const EpochRecord&)>& progress) {
  gcfg.validate();
  mcfg.validate();
  tcfg.validate();
  if (gcfg.feature_mask.dims() != mcfg.node_in_dim) {
    throw ShapeError("feature mask dims (" + std::to_string(gcfg.feature_mask.dims()) +
                     ") do not match model node_in_dim (" + std::to_string(mcfg.node_in_dim) + ")");
  }

  std::vector<int> positives, negatives;
  for (std::size_t i = 0; i < train_data.records.size(); ++i) {
    (train_data.records[i].label == 1 ? positives : negatives).push_back(static_cast<int>(i));
  }
  if (positives.empty() || negatives.empty()) {
    throw ConfigError("training set must contain both classes");
  }

  std::vector<PerturbConfig> schedule;
  for (std::size_t i = tcfg.warmup_exclusion; i < noise_schedule.size(); ++i) {
    schedule.push_back(noise_schedule[i]);
  }

  // Clean validation graphs, built once.
  std::vector<VideoGraph> val_graphs;
  std::vector<int> val_labels;
  val_graphs.reserve(val_data.records.size());
  for (const VideoRecord& rec : val_data.records) {
    val_graphs.push_back(build_graph(rec, gcfg));
    val_labels.push_back(rec.label);
  }

  Parameters params = init_params(mcfg, derive_seed(tcfg.seed, kSeedInit));
  AdamState adam = make_adam_state(mcfg);
  Rng sampler(derive_seed(tcfg.seed, kSeedSampler));

  TrainResult result;
  result.history.initial_val_auc = score_val_auc(val_graphs, val_labels, params, mcfg);
  result.best_val_auc = result.history.initial_val_auc;
  result.best_epoch = 0;
  result.params = params;

  const int half = tcfg.batch_size / 2;
  const int n_threads = std::max(
      1, std::min(tcfg.threads > 0 ? tcfg.threads
                                   : static_cast<int>(std::thread::hardware_concurrency()),
                  tcfg.batch_size));

  std::vector<VideoGraph> train_graphs(train_data.records.size());
  std::vector<GraphSlot> slots(tcfg.batch_size);
  for (GraphSlot& s : slots) s.grads = zero_tensors(mcfg);
  TensorMap batch_grads = zero_tensors(mcfg);

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    // Periodic regeneration from a perturbed copy of the training detections.
    if ((epoch - 1) % tcfg.regen_interval == 0) {
      const std::size_t k = static_cast<std::size_t>(epoch - 1) / tcfg.regen_interval;
      Dataset regen;
      const Dataset* source = &train_data;
      if (!schedule.empty()) {
        const PerturbConfig& level = schedule[k % schedule.size()];
        if (!level.is_zero()) {
          regen = perturb_dataset(train_data, level, derive_seed(tcfg.seed, kSeedRegenBase + k));
          source = &regen;
        }
      }
      // Per-video builds are pure; slot assignment keeps determinism.
      std::atomic<std::size_t> next_video{0};
      auto build_worker = [&]() {
        for (;;) {
          const std::size_t i = next_video.fetch_add(1);
          if (i >= source->records.size()) break;
          train_graphs[i] = build_graph(source->records[i], gcfg);
        }
      };
      if (n_threads == 1) {
        build_worker();
      } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(build_worker);
        for (std::thread& t : pool) t.join();
      }
    }

    std::vector<int> batch = sample_class(positives, half, sampler);
    {
      std::vector<int> neg = sample_class(negatives, half, sampler);
      batch.insert(batch.end(), neg.begin(), neg.end());
    }

    // Per-graph forward/backward, parallel over batch slots; the reduction
    // below always runs in slot order, so results do not depend on thread
    // count or completion order.
    const ParamsView pview = detail::make_view(params, mcfg);
    std::atomic<int> next_slot{0};
    auto worker = [&]() {
      ForwardTrace tr;
      for (;;) {
        const int s = next_slot.fetch_add(1);
        if (s >= tcfg.batch_size) break;
        GraphSlot& slot = slots[s];
        for (auto& [name, tensor] : slot.grads) {
          std::fill(tensor.data.begin(), tensor.data.end(), 0.0);
        }
        const VideoGraph& g = train_graphs[batch[s]];
        detail::run_forward(g, pview, mcfg, tr);
        slot.losses = detail::run_backward(tr, pview, mcfg, g.label, slot.grads);
      }
    };
    if (n_threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(n_threads);
      for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }

    for (auto& [name, tensor] : batch_grads) {
      std::fill(tensor.data.begin(), tensor.data.end(), 0.0);
    }
    EpochRecord record;
    record.epoch = epoch;
    const double inv_batch = 1.0 / tcfg.batch_size;
    for (const GraphSlot& slot : slots) {
      for (auto& [name, tensor] : batch_grads) {
        kn::axpy(inv_batch, slot.grads.at(name).data.data(), tensor.data.data(), tensor.size());
      }
      record.loss += slot.losses.total * inv_batch;
      record.node_loss += slot.losses.node * inv_batch;
      record.graph_loss += slot.losses.graph * inv_batch;
    }

    adam_step(params, batch_grads, adam, tcfg);

    if (epoch % tcfg.eval_interval == 0 || epoch == tcfg.epochs) {
      record.val_auc = score_val_auc(val_graphs, val_labels, params, mcfg);
      record.has_val_auc = true;
      if (record.val_auc > result.best_val_auc) {
        result.best_val_auc = record.val_auc;
        result.best_epoch = epoch;
        result.params = params;
      }
    }
    result.history.epochs.push_back(record);
    if (progress) progress(record);
  }

  return result;
}

VideoGraph make_gradcheck_graph(std::uint64_t seed) {
  Rng rng(seed);
  VideoRecord rec;
  rec.video_id = "gradcheck_" + std::to_string(seed);
  rec.label = rng.uniform() < 0.5 ? 1 : 0;
  const int n_nodes = rng.uniform_int(3, 12);
  const int n_frames = 6;
  rec.frames.resize(n_frames);
  for (int t = 0; t < n_frames; ++t) rec.frames[t].frame_index = t;

  // Two spatial cluster anchors; boxes near an anchor overlap across frames.
  const double anchors[2][2] = {{rng.uniform(0.15, 0.35), rng.uniform(0.15, 0.35)},
                                {rng.uniform(0.55, 0.8), rng.uniform(0.55, 0.8)}};
  for (int i = 0; i < n_nodes; ++i) {
    const int t = rng.uniform_int(0, n_frames - 1);
    const int cluster = rng.uniform() < 0.7 ? 0 : 1;
    const double w = rng.uniform(0.1, 0.2);
    const double h = rng.uniform(0.1, 0.2);
    double x = anchors[cluster][0] + rng.gaussian(0.0, 0.03);
    double y = anchors[cluster][1] + rng.gaussian(0.0, 0.03);
    x = std::clamp(x, 0.0, 1.0 - w);
    y = std::clamp(y, 0.0, 1.0 - h);
    rec.frames[t].boxes.push_back({x, y, w, h, rng.uniform(0.2, 0.95)});
  }
  if (rec.label == 1) {
    // Ground truth over the first cluster so node labels come out mixed.
    const double gw = 0.25, gh = 0.25;
    const double gx = std::clamp(anchors[0][0] - 0.05, 0.0, 1.0 - gw);
    const double gy = std::clamp(anchors[0][1] - 0.05, 0.0, 1.0 - gh);
    for (int t = 0; t < n_frames; ++t) rec.frames[t].gt_boxes.push_back({gx, gy, gw, gh});
  }
  return build_graph(rec, GraphConfig{});
}

void save_history(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open history log for writing: " + path);
  nlohmann::json first = {{"epoch", 0}, {"val_auc", history.initial_val_auc}};
  out << first.dump() << '\n';
  for (const EpochRecord& r : history.epochs) {
    nlohmann::json j = {{"epoch", r.epoch},
                        {"loss", r.loss},
                        {"node_loss", r.node_loss},
                        {"graph_loss", r.graph_loss}};
    if (r.has_val_auc) j["val_auc"] = r.val_auc;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failure on history log: " + path);
}

}  // namespace gada
