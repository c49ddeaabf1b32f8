#pragma once

#include <array>
#include <string>
#include <vector>

#include "gada/detection.hpp"

namespace gada {

// Which box attributes feed the node feature vector. Canonical feature order
// is [x, y, w, h, c] filtered by the mask.
struct FeatureMask {
  bool position = false;  // x, y
  bool size = true;       // w, h
  bool confidence = true; // c

  int dims() const { return (position ? 2 : 0) + (size ? 2 : 0) + (confidence ? 1 : 0); }
  bool any() const { return position || size || confidence; }
  std::string name() const;
};

FeatureMask feature_mask_from_name(const std::string& name);

struct GraphConfig {
  int frame_window = 5;        // epsilon: max |t_u - t_v| for an edge
  double iou_threshold = 0.0;  // delta: edge requires iou > delta (strict)
  double conf_threshold = 0.01;  // node requires c > conf_threshold (strict)
  FeatureMask feature_mask;
  bool use_edge_features = true;  // false: edge feature vectors are zeroed

  void validate() const;  // throws ConfigError
};

struct Node {
  int node_id = 0;      // dense, assigned in (frame, within-frame) order
  int frame_index = 0;
  BoundingBox box;
  std::vector<double> features;
  int label = -1;  // +1 iff box overlaps some gt box on its frame
};

// Directed edge; every qualifying pair appears in both orientations with
// identical (symmetric) features [iou, center distance, |frame gap|].
struct Edge {
  int src = 0;
  int dst = 0;
  std::array<double, 3> features{};
};

struct VideoGraph {
  std::string video_id;
  int label = 0;
  std::vector<Node> nodes;
  std::vector<Edge> edges;  // sorted by (src, dst)
};

// +1 iff max IoU against gt is strictly positive; -1 otherwise.
int label_node(const BoundingBox& box, const std::vector<GroundTruthBox>& gt_boxes);

// Pure function of (record, cfg): confidence-gated nodes, window/IoU-gated
// edges in both orientations.
VideoGraph build_graph(const VideoRecord& record, const GraphConfig& cfg);

// Structured single-object dump (same container syntax as the stream format).
void dump_graph(const VideoGraph& graph, const std::string& path);

}  // namespace gada
