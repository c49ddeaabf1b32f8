#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "forward_oracle.hpp"
#include "gada/model.hpp"
#include "gada/rng.hpp"
#include "gada/train.hpp"

using namespace gada;
namespace fs = std::filesystem;

TEST_CASE("init_params is deterministic and biases start at zero") {
  const ModelConfig cfg;
  const Parameters a = init_params(cfg, 9);
  const Parameters b = init_params(cfg, 9);
  REQUIRE(a.tensors.size() == b.tensors.size());
  for (const auto& [name, tensor] : a.tensors) {
    CHECK(tensor.data == b.tensors.at(name).data);
  }
  const Parameters c = init_params(cfg, 10);
  CHECK(a.tensors.at("embed.W").data != c.tensors.at("embed.W").data);
  for (double v : a.tensors.at("embed.b").data) CHECK(v == 0.0);
  for (double v : a.tensors.at("l1.h1.phi.b1").data) CHECK(v == 0.0);
}

TEST_CASE("tensor shapes match the declared spec") {
  const ModelConfig cfg;
  const Parameters p = init_params(cfg, 1);
  const auto spec = tensor_spec(cfg);
  REQUIRE(p.tensors.size() == spec.size());
  for (const auto& [name, shape] : spec) {
    REQUIRE(p.tensors.count(name) == 1);
    CHECK(p.tensors.at(name).shape == shape);
  }
  CHECK(p.tensors.at("embed.W").shape == std::vector<std::size_t>{64, 3});
  CHECK(p.tensors.at("l2.h3.Wq").shape == std::vector<std::size_t>{16, 64});
  CHECK(p.tensors.at("l1.h1.phi.W1").shape == std::vector<std::size_t>{32, 67});
  CHECK(p.tensors.at("l3.Wout").shape == std::vector<std::size_t>{64, 64});
}

TEST_CASE("default configuration parameter count") {
  // 2 embed tensors + 3 layers x (3 combine + 4 heads x 8) + 2 readout.
  const ModelConfig cfg;
  const Parameters p = init_params(cfg, 1);
  // embed 64*3+64, per layer 64*64*2+64 + 4*(2*16*64 + 32*67 + 32 + 16*32 + 16 + 3 + 1),
  // readout 64+1.
  const std::size_t per_head = 2 * 16 * 64 + 32 * 67 + 32 + 16 * 32 + 16 + 3 + 1;
  const std::size_t expected = (64 * 3 + 64) + 3 * (2 * 64 * 64 + 64 + 4 * per_head) + 64 + 1;
  CHECK(param_count(p) == expected);
  CHECK(param_count(p) == 82161);
}

TEST_CASE("empty graph: fixed logit -1, empty outputs") {
  VideoGraph g;
  g.video_id = "empty";
  g.label = 0;
  const ModelConfig cfg;
  const GraphOutput out = forward(g, init_params(cfg, 3), cfg);
  CHECK(out.graph_logit == -1.0);
  CHECK(out.probability == doctest::Approx(0.2689414213699951).epsilon(1e-12));
  CHECK(out.node_scores.empty());
  CHECK(out.node_weights.empty());
}

TEST_CASE("constant node scores make the logit that constant") {
  // read.w = 0 forces every node score to tanh(read.b).
  const VideoGraph g = fixtures::path3_graph();
  const ModelConfig cfg;
  Parameters p = init_params(cfg, 4);
  std::fill(p.tensors.at("read.w").data.begin(), p.tensors.at("read.w").data.end(), 0.0);
  p.tensors.at("read.b").data[0] = 0.37;
  const GraphOutput out = forward(g, p, cfg);
  const double s = std::tanh(0.37);
  for (double y : out.node_scores) CHECK(y == doctest::Approx(s).epsilon(1e-15));
  CHECK(out.graph_logit == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("forward matches the straight-line oracle on the fixed path graph") {
  const VideoGraph g = fixtures::path3_graph();
  REQUIRE(g.nodes.size() == 3);
  REQUIRE(g.edges.size() == 4);  // path, both orientations
  const ModelConfig cfg;
  const Parameters p = fixtures::constant_params(cfg, 0.1);
  const GraphOutput out = forward(g, p, cfg);
  const oracle::Reference ref = oracle::reference_forward(g, p, cfg);
  CHECK(std::abs(out.graph_logit - ref.graph_logit) <= 1e-12);
  for (std::size_t v = 0; v < g.nodes.size(); ++v) {
    CHECK(std::abs(out.node_scores[v] - ref.node_scores[v]) <= 1e-12);
    CHECK(std::abs(out.node_weights[v] - ref.node_weights[v]) <= 1e-12);
  }
}

TEST_CASE("forward matches the oracle on random graphs and parameters") {
  const ModelConfig cfg;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const VideoGraph g = make_gradcheck_graph(derive_seed(404, seed));
    const Parameters p = init_params(cfg, derive_seed(405, seed));
    const GraphOutput out = forward(g, p, cfg);
    const oracle::Reference ref = oracle::reference_forward(g, p, cfg);
    CHECK(std::abs(out.graph_logit - ref.graph_logit) <= 1e-12);
    for (std::size_t v = 0; v < g.nodes.size(); ++v) {
      CHECK(std::abs(out.node_scores[v] - ref.node_scores[v]) <= 1e-12);
    }
  }
}

TEST_CASE("attention rows are softmax-normalized per destination, head, layer") {
  const ModelConfig cfg;
  const VideoGraph g = make_gradcheck_graph(42);
  const GraphOutput out = forward(g, init_params(cfg, 5), cfg);
  REQUIRE(out.attention.size() == static_cast<std::size_t>(cfg.num_layers));
  for (const auto& layer : out.attention) {
    REQUIRE(layer.size() == static_cast<std::size_t>(cfg.num_heads));
    for (const auto& head : layer) {
      REQUIRE(head.size() == g.edges.size());
      std::vector<double> per_dst(g.nodes.size(), 0.0);
      std::vector<int> indeg(g.nodes.size(), 0);
      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        CHECK(head[e] >= 0.0);
        CHECK(head[e] <= 1.0);
        per_dst[g.edges[e].dst] += head[e];
        ++indeg[g.edges[e].dst];
      }
      for (std::size_t v = 0; v < per_dst.size(); ++v) {
        if (indeg[v] > 0) CHECK(std::abs(per_dst[v] - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("node weights form a distribution") {
  const ModelConfig cfg;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const VideoGraph g = make_gradcheck_graph(seed);
    const GraphOutput out = forward(g, init_params(cfg, seed), cfg);
    double total = 0.0;
    for (double b : out.node_weights) {
      CHECK(b >= 0.0);
      total += b;
    }
    if (!g.nodes.empty()) CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("edgeless graph falls back to uniform node weights") {
  VideoRecord rec;
  rec.video_id = "isolated";
  rec.label = 0;
  rec.frames = {{0, {{0.1, 0.1, 0.2, 0.2, 0.9}}, {}}, {10, {{0.6, 0.6, 0.2, 0.2, 0.8}}, {}}};
  const VideoGraph g = build_graph(rec, GraphConfig{});
  REQUIRE(g.edges.empty());
  REQUIRE(g.nodes.size() == 2);
  const ModelConfig cfg;
  const GraphOutput out = forward(g, init_params(cfg, 6), cfg);
  CHECK(out.node_weights[0] == 0.5);
  CHECK(out.node_weights[1] == 0.5);
  CHECK(out.graph_logit ==
        doctest::Approx(0.5 * (out.node_scores[0] + out.node_scores[1])).epsilon(1e-12));
}

TEST_CASE("outputs are bounded: scores in (-1,1), logit in [-1,1]") {
  const ModelConfig cfg;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const VideoGraph g = make_gradcheck_graph(seed);
    const GraphOutput out = forward(g, init_params(cfg, seed * 3), cfg);
    for (double y : out.node_scores) {
      CHECK(y > -1.0);
      CHECK(y < 1.0);
    }
    CHECK(out.graph_logit >= -1.0);
    CHECK(out.graph_logit <= 1.0);
    CHECK(out.probability == doctest::Approx(sigmoid(out.graph_logit)).epsilon(1e-15));
  }
}

TEST_CASE("node permutation leaves the logit unchanged and permutes scores") {
  const ModelConfig cfg;
  const Parameters p = init_params(cfg, 21);
  const VideoGraph g = make_gradcheck_graph(31);
  REQUIRE(g.nodes.size() >= 3);
  const GraphOutput base = forward(g, p, cfg);

  // Reverse permutation, edges remapped and reordered.
  const int n = static_cast<int>(g.nodes.size());
  std::vector<int> perm(n);
  for (int v = 0; v < n; ++v) perm[v] = n - 1 - v;
  VideoGraph pg;
  pg.video_id = g.video_id;
  pg.label = g.label;
  pg.nodes.resize(n);
  for (int v = 0; v < n; ++v) {
    Node node = g.nodes[v];
    node.node_id = perm[v];
    pg.nodes[perm[v]] = std::move(node);
  }
  for (const Edge& e : g.edges) pg.edges.push_back({perm[e.src], perm[e.dst], e.features});
  std::reverse(pg.edges.begin(), pg.edges.end());

  const GraphOutput permuted = forward(pg, p, cfg);
  CHECK(std::abs(permuted.graph_logit - base.graph_logit) <= 1e-9);
  for (int v = 0; v < n; ++v) {
    CHECK(std::abs(permuted.node_scores[perm[v]] - base.node_scores[v]) <= 1e-9);
  }
}

TEST_CASE("an isolated node never influences other nodes") {
  // Two overlapping tracks plus one far-away isolated box.
  VideoRecord rec;
  rec.video_id = "iso";
  rec.label = 0;
  const BoundingBox a{0.1, 0.1, 0.2, 0.2, 0.9};
  const BoundingBox b{0.15, 0.1, 0.2, 0.2, 0.8};
  rec.frames = {{0, {a}, {}}, {1, {b}, {}}, {2, {{0.7, 0.7, 0.1, 0.1, 0.5}}, {}}};
  const GraphConfig gcfg;
  const VideoGraph g = build_graph(rec, gcfg);
  REQUIRE(g.nodes.size() == 3);
  REQUIRE(g.edges.size() == 2);  // only the a-b pair

  const ModelConfig cfg;
  const Parameters p = init_params(cfg, 77);
  const GraphOutput base = forward(g, p, cfg);

  VideoRecord bumped = rec;
  bumped.frames[2].boxes[0].c = 0.95;  // perturb the isolated node's feature
  const GraphOutput after = forward(build_graph(bumped, gcfg), p, cfg);
  CHECK(after.node_scores[0] == base.node_scores[0]);
  CHECK(after.node_scores[1] == base.node_scores[1]);
  CHECK(after.node_scores[2] != base.node_scores[2]);
  // The isolated node holds no attention mass, so the logit is untouched.
  CHECK(base.node_weights[2] == 0.0);
  CHECK(after.graph_logit == base.graph_logit);
}

TEST_CASE("forward is a pure function: repeated calls bit-identical") {
  const ModelConfig cfg;
  const VideoGraph g = make_gradcheck_graph(55);
  const Parameters p = init_params(cfg, 56);
  const GraphOutput a = forward(g, p, cfg);
  const GraphOutput b = forward(g, p, cfg);
  CHECK(a.graph_logit == b.graph_logit);
  CHECK(a.node_scores == b.node_scores);
  CHECK(a.node_weights == b.node_weights);
}

TEST_CASE("feature length mismatch raises ShapeError") {
  const ModelConfig cfg;  // node_in_dim 3
  GraphConfig gcfg;
  gcfg.feature_mask = FeatureMask{true, true, true};  // 5 dims
  const VideoGraph g = build_graph(fixtures::path3_record(), gcfg);
  CHECK_THROWS_AS(forward(g, init_params(cfg, 1), cfg), ShapeError);
}

TEST_CASE("checkpoint round-trip preserves the forward bit-exactly") {
  const ModelConfig cfg;
  const Parameters p = init_params(cfg, 91);
  const VideoGraph g = fixtures::path3_graph();
  const double logit_before = forward(g, p, cfg).graph_logit;

  const std::string path = (fs::temp_directory_path() / "gada_ckpt.json").string();
  save_checkpoint(p, cfg, path);
  const auto [loaded, loaded_cfg] = load_checkpoint(path);
  CHECK(loaded_cfg.hidden_dim == cfg.hidden_dim);
  for (const auto& [name, tensor] : p.tensors) {
    CHECK(tensor.data == loaded.tensors.at(name).data);  // exact, not approximate
  }
  CHECK(forward(g, loaded, loaded_cfg).graph_logit == logit_before);
  fs::remove(path);
}

TEST_CASE("truncated checkpoint raises a structured error") {
  const ModelConfig cfg;
  const std::string path = (fs::temp_directory_path() / "gada_ckpt_trunc.json").string();
  save_checkpoint(init_params(cfg, 1), cfg, path);
  // Truncate to half size.
  const auto size = fs::file_size(path);
  fs::resize_file(path, size / 2);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  fs::remove(path);
}

TEST_CASE("checkpoint with a mis-shaped tensor names the offender") {
  const ModelConfig cfg;
  const std::string path = (fs::temp_directory_path() / "gada_ckpt_bad.json").string();
  Parameters p = init_params(cfg, 1);
  p.tensors.at("l2.h1.Wq").data.pop_back();
  p.tensors.at("l2.h1.Wq").shape = {15, 64};
  save_checkpoint(p, cfg, path);
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("l2.h1.Wq"), ShapeError);
  fs::remove(path);
}

TEST_CASE("missing checkpoint file raises IoError") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json"), IoError);
}

TEST_CASE("invalid model configs are rejected") {
  ModelConfig cfg;
  cfg.hidden_dim = 63;  // not divisible by 4 heads
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ModelConfig{};
  cfg.num_layers = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
