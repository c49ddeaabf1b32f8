#pragma once

// Shared test fixtures: the fixed 3-node path graph and hand-set parameters.

#include "gada/graph.hpp"
#include "gada/model.hpp"

namespace fixtures {

// Path over frames 0-1-2: boxes 0-1 and 1-2 overlap, 0-2 are disjoint, so the
// only edges are the two adjacent pairs (both orientations).
inline gada::VideoRecord path3_record() {
  gada::VideoRecord rec;
  rec.video_id = "path3";
  rec.label = 1;
  const gada::BoundingBox b0{0.00, 0.1, 0.2, 0.2, 0.9};
  const gada::BoundingBox b1{0.15, 0.1, 0.2, 0.2, 0.8};
  const gada::BoundingBox b2{0.30, 0.1, 0.2, 0.2, 0.7};
  rec.frames = {{0, {b0}, {}}, {1, {b1}, {{0.15, 0.1, 0.2, 0.2}}}, {2, {b2}, {}}};
  return rec;
}

inline gada::VideoGraph path3_graph() {
  return gada::build_graph(path3_record(), gada::GraphConfig{});
}

// Every weight tensor filled with `weight`, biases zero.
inline gada::Parameters constant_params(const gada::ModelConfig& cfg, double weight) {
  gada::Parameters p;
  p.tensors = gada::zero_tensors(cfg);
  for (auto& [name, tensor] : p.tensors) {
    const auto dot = name.rfind('.');
    const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
    if (!leaf.empty() && leaf[0] == 'b') continue;
    for (double& v : tensor.data) v = weight;
  }
  return p;
}

}  // namespace fixtures
