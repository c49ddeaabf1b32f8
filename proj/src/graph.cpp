#include "gada/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace gada {

using nlohmann::json;

std::string FeatureMask::name() const {
  std::string out;
  if (position) out += "position+";
  if (size) out += "size+";
  if (confidence) out += "confidence+";
  if (!out.empty()) out.pop_back();
  return out.empty() ? "none" : out;
}

FeatureMask feature_mask_from_name(const std::string& name) {
  FeatureMask m{false, false, false};
  std::string token;
  for (std::size_t i = 0; i <= name.size(); ++i) {
    if (i == name.size() || name[i] == '+') {
      if (token == "position") m.position = true;
      else if (token == "size") m.size = true;
      else if (token == "confidence") m.confidence = true;
      else if (!token.empty()) throw ConfigError("unknown feature token '" + token + "'");
      token.clear();
    } else {
      token += name[i];
    }
  }
  return m;
}

void GraphConfig::validate() const {
  if (frame_window < 1) throw ConfigError("frame_window must be >= 1");
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError("iou_threshold must be in [0,1]");
  }
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
    throw ConfigError("conf_threshold must be in [0,1]");
  }
  if (!feature_mask.any()) throw ConfigError("feature_mask must select at least one feature");
}

int label_node(const BoundingBox& box, const std::vector<GroundTruthBox>& gt_boxes) {
  double best = 0.0;
  for (const GroundTruthBox& g : gt_boxes) best = std::max(best, iou(box, g));
  return best > 0.0 ? 1 : -1;
}

namespace {

std::vector<double> node_features(const BoundingBox& b, const FeatureMask& mask) {
  std::vector<double> f;
  f.reserve(mask.dims());
  if (mask.position) {
    f.push_back(b.x);
    f.push_back(b.y);
  }
  if (mask.size) {
    f.push_back(b.w);
    f.push_back(b.h);
  }
  if (mask.confidence) f.push_back(b.c);
  return f;
}

}  // namespace

VideoGraph build_graph(const VideoRecord& record, const GraphConfig& cfg) {
  cfg.validate();
  VideoGraph g;
  g.video_id = record.video_id;
  g.label = record.label;

  // Nodes: confidence gate is strict, ids dense in (frame, within-frame) order.
  std::vector<int> frame_begin;  // node-range start per kept frame
  std::vector<int> frame_time;
  for (const FrameDetections& f : record.frames) {
    frame_begin.push_back(static_cast<int>(g.nodes.size()));
    frame_time.push_back(f.frame_index);
    for (const BoundingBox& b : f.boxes) {
      if (!(b.c > cfg.conf_threshold)) continue;
      Node n;
      n.node_id = static_cast<int>(g.nodes.size());
      n.frame_index = f.frame_index;
      n.box = b;
      n.features = node_features(b, cfg.feature_mask);
      n.label = label_node(b, f.gt_boxes);
      g.nodes.push_back(std::move(n));
    }
  }
  frame_begin.push_back(static_cast<int>(g.nodes.size()));

  // Edges: distinct frames within the window, IoU strictly above delta,
  // both orientations with identical features.
  const int n_frames = static_cast<int>(frame_time.size());
  for (int i = 0; i < n_frames; ++i) {
    for (int j = i + 1; j < n_frames; ++j) {
      const int gap = frame_time[j] - frame_time[i];
      if (gap > cfg.frame_window) break;  // frame_index strictly increasing
      for (int a = frame_begin[i]; a < frame_begin[i + 1]; ++a) {
        for (int b = frame_begin[j]; b < frame_begin[j + 1]; ++b) {
          const double overlap = iou(g.nodes[a].box, g.nodes[b].box);
          if (!(overlap > cfg.iou_threshold)) continue;
          std::array<double, 3> feat{0.0, 0.0, 0.0};
          if (cfg.use_edge_features) {
            const auto ca = box_center(g.nodes[a].box);
            const auto cb = box_center(g.nodes[b].box);
            const double dist = std::hypot(ca.first - cb.first, ca.second - cb.second);
            feat = {overlap, dist, static_cast<double>(gap)};
          }
          g.edges.push_back({a, b, feat});
          g.edges.push_back({b, a, feat});
        }
      }
    }
  }

  std::sort(g.edges.begin(), g.edges.end(), [](const Edge& l, const Edge& r) {
    return l.src != r.src ? l.src < r.src : l.dst < r.dst;
  });
  return g;
}

void dump_graph(const VideoGraph& graph, const std::string& path) {
  json nodes = json::array();
  for (const Node& n : graph.nodes) {
    nodes.push_back({{"id", n.node_id},
                     {"t", n.frame_index},
                     {"box", {n.box.x, n.box.y, n.box.w, n.box.h, n.box.c}},
                     {"features", n.features},
                     {"label", n.label}});
  }
  json edges = json::array();
  for (const Edge& e : graph.edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"features", e.features}});
  }
  json j = {{"video_id", graph.video_id},
            {"label", graph.label},
            {"nodes", std::move(nodes)},
            {"edges", std::move(edges)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open graph dump for writing: " + path);
  out << j.dump() << '\n';
  if (!out) throw IoError("write failure on graph dump: " + path);
}

}  // namespace gada
