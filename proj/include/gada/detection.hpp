#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "gada/errors.hpp"

namespace gada {

// One detector output box. Geometry is normalized by the frame dimensions:
// (x, y) is the top-left corner, (w, h) the extent, all within [0, 1];
// c is the detection confidence.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  double c = 0.0;
};

// Annotated pathology extent. Same geometry convention, no confidence.
struct GroundTruthBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

struct FrameDetections {
  int frame_index = 0;
  std::vector<BoundingBox> boxes;     // may be empty
  std::vector<GroundTruthBox> gt_boxes;
};

struct VideoRecord {
  std::string video_id;
  int label = 0;  // 1 = pathology present
  std::vector<FrameDetections> frames;
};

enum class Split { kTrain, kVal, kTest };
const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct Dataset {
  std::vector<VideoRecord> records;
  Split split = Split::kTrain;
};

// ---------------------------------------------------------------------------
// Box geometry
// ---------------------------------------------------------------------------

// Intersection over union of two axis-aligned boxes. Works across box types;
// exactly 0 for boxes whose intersection has zero area.
template <typename BoxA, typename BoxB>
double iou(const BoxA& a, const BoxB& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return inter / uni;
}

template <typename Box>
std::pair<double, double> box_center(const Box& b) {
  return {b.x + b.w / 2.0, b.y + b.h / 2.0};
}

// ---------------------------------------------------------------------------
// Validation (throws FormatError naming the offending record/field)
// ---------------------------------------------------------------------------

void validate_box_geometry(double x, double y, double w, double h, const std::string& context);
void validate_record(const VideoRecord& rec);
void validate_dataset(const Dataset& ds);

// ---------------------------------------------------------------------------
// Detection-stream file format
// ---------------------------------------------------------------------------
// Line-delimited JSON, one video per line:
//   {"video_id": "...", "label": 0|1,
//    "frames": [{"t": 0, "boxes": [[x,y,w,h,c], ...], "gt": [[x,y,w,h], ...]}, ...]}
// Keys are emitted in sorted order and doubles with shortest round-trip
// precision, so a (config, seed) pair always produces byte-identical files.

Dataset load_dataset(const std::string& path, Split split = Split::kTrain);
void save_dataset(const Dataset& ds, const std::string& path);

// Serialized form of one record (one line, no trailing newline).
std::string record_to_line(const VideoRecord& rec);
VideoRecord record_from_line(const std::string& line);

bool operator==(const BoundingBox& a, const BoundingBox& b);
bool operator==(const GroundTruthBox& a, const GroundTruthBox& b);
bool operator==(const FrameDetections& a, const FrameDetections& b);
bool operator==(const VideoRecord& a, const VideoRecord& b);
bool operator==(const Dataset& a, const Dataset& b);

}  // namespace gada
