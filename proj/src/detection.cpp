#include "gada/detection.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace gada {

using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split name: " + name);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {
constexpr double kGeomTol = 1e-9;
}

void validate_box_geometry(double x, double y, double w, double h, const std::string& context) {
  if (!(x >= 0.0) || !(y >= 0.0)) {
    throw FormatError(context + ": box corner must be nonnegative (x=" + std::to_string(x) +
                      ", y=" + std::to_string(y) + ")");
  }
  if (!(w > 0.0) || !(h > 0.0)) {
    throw FormatError(context + ": box extent must be positive (w=" + std::to_string(w) +
                      ", h=" + std::to_string(h) + ")");
  }
  if (x + w > 1.0 + kGeomTol || y + h > 1.0 + kGeomTol) {
    throw FormatError(context + ": box exceeds the unit frame (x+w=" + std::to_string(x + w) +
                      ", y+h=" + std::to_string(y + h) + ")");
  }
}

void validate_record(const VideoRecord& rec) {
  const std::string ctx = "video '" + rec.video_id + "'";
  if (rec.label != 0 && rec.label != 1) {
    throw FormatError(ctx + ": label must be 0 or 1");
  }
  if (rec.frames.empty()) {
    throw FormatError(ctx + ": frames must be nonempty");
  }
  int prev_t = -1;
  for (const FrameDetections& f : rec.frames) {
    const std::string fctx = ctx + " frame " + std::to_string(f.frame_index);
    if (f.frame_index < 0) throw FormatError(fctx + ": frame_index must be nonnegative");
    if (f.frame_index <= prev_t) {
      throw FormatError(fctx + ": frame_index must be strictly increasing");
    }
    prev_t = f.frame_index;
    for (const BoundingBox& b : f.boxes) {
      validate_box_geometry(b.x, b.y, b.w, b.h, fctx + " box");
      if (!(b.c >= 0.0 && b.c <= 1.0)) {
        throw FormatError(fctx + ": confidence out of [0,1] (c=" + std::to_string(b.c) + ")");
      }
    }
    for (const GroundTruthBox& g : f.gt_boxes) {
      validate_box_geometry(g.x, g.y, g.w, g.h, fctx + " gt box");
    }
    if (rec.label == 0 && !f.gt_boxes.empty()) {
      throw FormatError(fctx + ": negative-label video must have empty gt");
    }
  }
}

void validate_dataset(const Dataset& ds) {
  std::set<std::string> ids;
  for (const VideoRecord& rec : ds.records) {
    validate_record(rec);
    if (!ids.insert(rec.video_id).second) {
      throw FormatError("duplicate video_id '" + rec.video_id + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string record_to_line(const VideoRecord& rec) {
  json frames = json::array();
  for (const FrameDetections& f : rec.frames) {
    json boxes = json::array();
    for (const BoundingBox& b : f.boxes) boxes.push_back({b.x, b.y, b.w, b.h, b.c});
    json gt = json::array();
    for (const GroundTruthBox& g : f.gt_boxes) gt.push_back({g.x, g.y, g.w, g.h});
    frames.push_back({{"t", f.frame_index}, {"boxes", std::move(boxes)}, {"gt", std::move(gt)}});
  }
  json line = {{"video_id", rec.video_id}, {"label", rec.label}, {"frames", std::move(frames)}};
  return line.dump();
}

namespace {

double number_field(const json& arr, std::size_t i, const std::string& ctx) {
  if (!arr[i].is_number()) throw FormatError(ctx + ": expected a number at position " + std::to_string(i));
  return arr[i].get<double>();
}

}  // namespace

VideoRecord record_from_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("unparseable record line: ") + e.what());
  }
  if (!j.is_object() || !j.contains("video_id") || !j.contains("label") || !j.contains("frames")) {
    throw FormatError("record line missing one of video_id/label/frames");
  }
  VideoRecord rec;
  if (!j["video_id"].is_string()) throw FormatError("video_id must be a string");
  rec.video_id = j["video_id"].get<std::string>();
  const std::string ctx = "video '" + rec.video_id + "'";
  if (!j["label"].is_number_integer()) throw FormatError(ctx + ": label must be an integer");
  rec.label = j["label"].get<int>();
  if (!j["frames"].is_array()) throw FormatError(ctx + ": frames must be an array");
  for (const json& jf : j["frames"]) {
    if (!jf.is_object() || !jf.contains("t") || !jf.contains("boxes") || !jf.contains("gt")) {
      throw FormatError(ctx + ": frame missing one of t/boxes/gt");
    }
    FrameDetections f;
    if (!jf["t"].is_number_integer()) throw FormatError(ctx + ": frame t must be an integer");
    f.frame_index = jf["t"].get<int>();
    const std::string fctx = ctx + " frame " + std::to_string(f.frame_index);
    if (!jf["boxes"].is_array() || !jf["gt"].is_array()) {
      throw FormatError(fctx + ": boxes/gt must be arrays");
    }
    for (const json& jb : jf["boxes"]) {
      if (!jb.is_array() || jb.size() != 5) throw FormatError(fctx + ": box must be [x,y,w,h,c]");
      BoundingBox b;
      b.x = number_field(jb, 0, fctx + " box x");
      b.y = number_field(jb, 1, fctx + " box y");
      b.w = number_field(jb, 2, fctx + " box w");
      b.h = number_field(jb, 3, fctx + " box h");
      b.c = number_field(jb, 4, fctx + " box c");
      f.boxes.push_back(b);
    }
    for (const json& jg : jf["gt"]) {
      if (!jg.is_array() || jg.size() != 4) throw FormatError(fctx + ": gt box must be [x,y,w,h]");
      GroundTruthBox g;
      g.x = number_field(jg, 0, fctx + " gt x");
      g.y = number_field(jg, 1, fctx + " gt y");
      g.w = number_field(jg, 2, fctx + " gt w");
      g.h = number_field(jg, 3, fctx + " gt h");
      f.gt_boxes.push_back(g);
    }
    rec.frames.push_back(std::move(f));
  }
  validate_record(rec);
  return rec;
}

Dataset load_dataset(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  Dataset ds;
  ds.split = split;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ds.records.push_back(record_from_line(line));
  }
  if (in.bad()) throw IoError("read failure on dataset file: " + path);
  validate_dataset(ds);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open dataset file for writing: " + path);
  for (const VideoRecord& rec : ds.records) {
    out << record_to_line(rec) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failure on dataset file: " + path);
}

// ---------------------------------------------------------------------------
// Structural equality
// ---------------------------------------------------------------------------

bool operator==(const BoundingBox& a, const BoundingBox& b) {
  return a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h && a.c == b.c;
}

bool operator==(const GroundTruthBox& a, const GroundTruthBox& b) {
  return a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h;
}

bool operator==(const FrameDetections& a, const FrameDetections& b) {
  return a.frame_index == b.frame_index && a.boxes == b.boxes && a.gt_boxes == b.gt_boxes;
}

bool operator==(const VideoRecord& a, const VideoRecord& b) {
  return a.video_id == b.video_id && a.label == b.label && a.frames == b.frames;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.split == b.split && a.records == b.records;
}

}  // namespace gada
