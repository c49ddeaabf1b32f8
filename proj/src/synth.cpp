#include "gada/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gada/rng.hpp"

namespace gada {

namespace {

constexpr double kMinExtent = 1e-4;

void check_prob(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError(std::string(name) + " must be in [0,1], got " + std::to_string(p));
  }
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0)) {
    throw ConfigError(std::string(name) + " must be > 0, got " + std::to_string(v));
  }
}

void check_nonneg(double v, const char* name) {
  if (!(v >= 0.0)) {
    throw ConfigError(std::string(name) + " must be >= 0, got " + std::to_string(v));
  }
}

// Reflect a walk coordinate back into [lo, hi].
double reflect(double v, double lo, double hi) {
  if (hi <= lo) return lo;
  const double span = hi - lo;
  double t = std::fmod(v - lo, 2.0 * span);
  if (t < 0.0) t += 2.0 * span;
  return t <= span ? lo + t : hi - (t - span);
}

// Clamp jittered geometry back to a valid box.
void clamp_geometry(double& x, double& y, double& w, double& h) {
  w = std::clamp(w, kMinExtent, 1.0);
  h = std::clamp(h, kMinExtent, 1.0);
  x = std::clamp(x, 0.0, 1.0 - w);
  y = std::clamp(y, 0.0, 1.0 - h);
}

// One coherent drifting track. gt_track controls whether the path enters the
// frame's gt list (pathology) or only its detections (distractor) and which
// Beta distribution the confidences come from.
void emit_track(const GeneratorConfig& cfg, Rng& rng, VideoRecord& rec, bool gt_track) {
  const int n_frames = static_cast<int>(rec.frames.size());
  const int length =
      std::min(rng.uniform_int(cfg.track_length_min, cfg.track_length_max), n_frames);
  const int start = rng.uniform_int(0, n_frames - length);
  const double w = rng.uniform(0.08, 0.20);
  const double h = rng.uniform(0.08, 0.20);
  const double cx_lo = w / 2.0, cx_hi = 1.0 - w / 2.0;
  const double cy_lo = h / 2.0, cy_hi = 1.0 - h / 2.0;
  double cx = rng.uniform(cx_lo, cx_hi);
  double cy = rng.uniform(cy_lo, cy_hi);
  // One index per gt track is exempt from dropping and emitted jitter-free so
  // every positive video keeps at least one gt-overlapping detection (unless
  // detect_drop_prob is exactly 1).
  const int guaranteed = rng.uniform_int(0, length - 1);
  const double conf_a = gt_track ? cfg.track_conf_alpha : cfg.clutter_conf_alpha;
  const double conf_b = gt_track ? cfg.track_conf_beta : cfg.clutter_conf_beta;

  for (int i = 0; i < length; ++i) {
    const int t = start + i;
    const double gx = cx - w / 2.0;
    const double gy = cy - h / 2.0;
    if (gt_track) rec.frames[t].gt_boxes.push_back({gx, gy, w, h});

    const double conf = rng.beta(conf_a, conf_b);
    const double jx = rng.gaussian(0.0, cfg.drift_sigma);
    const double jy = rng.gaussian(0.0, cfg.drift_sigma);
    const double drop_u = rng.uniform();
    cx = reflect(cx + rng.gaussian(0.0, cfg.drift_sigma), cx_lo, cx_hi);
    cy = reflect(cy + rng.gaussian(0.0, cfg.drift_sigma), cy_lo, cy_hi);

    const bool exempt = gt_track && i == guaranteed && cfg.detect_drop_prob < 1.0;
    if (!exempt && drop_u < cfg.detect_drop_prob) continue;
    double bx = gx, by = gy, bw = w, bh = h;
    if (!exempt) {
      bx += jx;
      by += jy;
    }
    clamp_geometry(bx, by, bw, bh);
    rec.frames[t].boxes.push_back({bx, by, bw, bh, conf});
  }
}

VideoRecord generate_video(const GeneratorConfig& cfg, std::uint64_t video_seed,
                           const std::string& video_id, bool positive) {
  Rng rng(video_seed);
  VideoRecord rec;
  rec.video_id = video_id;
  rec.label = positive ? 1 : 0;

  const int n_frames = rng.uniform_int(cfg.frames_min, cfg.frames_max);
  rec.frames.resize(n_frames);
  for (int t = 0; t < n_frames; ++t) rec.frames[t].frame_index = t;

  if (positive) {
    const int n_tracks = rng.uniform_int(cfg.tracks_per_positive_min, cfg.tracks_per_positive_max);
    for (int k = 0; k < n_tracks; ++k) emit_track(cfg, rng, rec, true);
  }
  for (int k = 0; k < cfg.distractor_tracks; ++k) emit_track(cfg, rng, rec, false);

  // Clutter in both classes.
  for (int t = 0; t < n_frames; ++t) {
    const int n_clutter = rng.poisson(cfg.clutter_rate);
    for (int k = 0; k < n_clutter; ++k) {
      const double w = rng.uniform(0.05, 0.18);
      const double h = rng.uniform(0.05, 0.18);
      const double x = rng.uniform(0.0, 1.0 - w);
      const double y = rng.uniform(0.0, 1.0 - h);
      const double conf = rng.beta(cfg.clutter_conf_alpha, cfg.clutter_conf_beta);
      rec.frames[t].boxes.push_back({x, y, w, h, conf});
    }
  }

  // Negatives: a burst of track-grade confidences at spatially incoherent
  // locations. Long enough to pull the frame-average toward the positives'
  // range, but it forms no coherent subgraph.
  if (!positive && rng.uniform() < cfg.spurious_burst_prob) {
    const int burst_len = rng.uniform_int(8, 25);
    const int start = rng.uniform_int(0, std::max(0, n_frames - burst_len));
    for (int i = 0; i < burst_len && start + i < n_frames; ++i) {
      const double w = rng.uniform(0.05, 0.18);
      const double h = rng.uniform(0.05, 0.18);
      const double x = rng.uniform(0.0, 1.0 - w);
      const double y = rng.uniform(0.0, 1.0 - h);
      const double conf = rng.beta(cfg.track_conf_alpha, cfg.track_conf_beta);
      rec.frames[start + i].boxes.push_back({x, y, w, h, conf});
    }
  }

  return rec;
}

std::string index_suffix(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_%05d", i);
  return buf;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (n_videos < 0) throw ConfigError("n_videos must be >= 0");
  check_prob(positive_fraction, "positive_fraction");
  if (frames_min < 1) throw ConfigError("frames_min must be >= 1");
  if (frames_min > frames_max) throw ConfigError("frames_min must be <= frames_max");
  if (tracks_per_positive_min < 1 || tracks_per_positive_min > tracks_per_positive_max) {
    throw ConfigError("tracks_per_positive range invalid");
  }
  if (track_length_min < 1 || track_length_min > track_length_max) {
    throw ConfigError("track_length range invalid");
  }
  check_nonneg(drift_sigma, "drift_sigma");
  check_positive(track_conf_alpha, "track_conf_alpha");
  check_positive(track_conf_beta, "track_conf_beta");
  check_nonneg(clutter_rate, "clutter_rate");
  check_positive(clutter_conf_alpha, "clutter_conf_alpha");
  check_positive(clutter_conf_beta, "clutter_conf_beta");
  check_prob(detect_drop_prob, "detect_drop_prob");
  check_prob(spurious_burst_prob, "spurious_burst_prob");
  if (distractor_tracks < 0) throw ConfigError("distractor_tracks must be >= 0");
}

void PerturbConfig::validate() const {
  check_nonneg(conf_noise_sigma, "conf_noise_sigma");
  check_nonneg(box_jitter_sigma, "box_jitter_sigma");
  check_prob(drop_prob, "drop_prob");
  check_nonneg(spurious_rate, "spurious_rate");
}

Dataset generate_dataset(const GeneratorConfig& config, std::uint64_t seed,
                         const std::string& id_prefix, Split split) {
  config.validate();
  Dataset ds;
  ds.split = split;
  const int n_pos = static_cast<int>(std::floor(config.n_videos * config.positive_fraction + 0.5));
  ds.records.reserve(config.n_videos);
  for (int i = 0; i < config.n_videos; ++i) {
    const bool positive = i < n_pos;
    ds.records.push_back(
        generate_video(config, derive_seed(seed, static_cast<std::uint64_t>(i)),
                       id_prefix + index_suffix(i), positive));
  }
  validate_dataset(ds);
  return ds;
}

Dataset perturb_dataset(const Dataset& dataset, const PerturbConfig& pcfg, std::uint64_t seed) {
  pcfg.validate();
  Dataset out;
  out.split = dataset.split;
  out.records.reserve(dataset.records.size());
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const VideoRecord& src = dataset.records[i];
    Rng rng(derive_seed(seed, i));
    VideoRecord rec;
    rec.video_id = src.video_id;
    rec.label = src.label;
    rec.frames.reserve(src.frames.size());
    for (const FrameDetections& f : src.frames) {
      FrameDetections nf;
      nf.frame_index = f.frame_index;
      nf.gt_boxes = f.gt_boxes;  // never touched
      for (const BoundingBox& b : f.boxes) {
        // Fixed draw order per box keeps the stream aligned regardless of
        // which perturbations are enabled; zero sigmas are exact identities.
        const double zc = rng.gaussian();
        const double zx = rng.gaussian();
        const double zy = rng.gaussian();
        const double zw = rng.gaussian();
        const double zh = rng.gaussian();
        const double drop_u = rng.uniform();
        if (drop_u < pcfg.drop_prob) continue;
        BoundingBox nb = b;
        nb.c = std::clamp(b.c + pcfg.conf_noise_sigma * zc, 0.0, 1.0);
        if (pcfg.box_jitter_sigma != 0.0) {
          nb.x = b.x + pcfg.box_jitter_sigma * zx;
          nb.y = b.y + pcfg.box_jitter_sigma * zy;
          nb.w = b.w + pcfg.box_jitter_sigma * zw;
          nb.h = b.h + pcfg.box_jitter_sigma * zh;
          // Floor at the original extent for boxes already below the minimum,
          // so re-clamping never enlarges an input box.
          nb.w = std::clamp(nb.w, std::min(b.w, kMinExtent), 1.0);
          nb.h = std::clamp(nb.h, std::min(b.h, kMinExtent), 1.0);
          nb.x = std::clamp(nb.x, 0.0, 1.0 - nb.w);
          nb.y = std::clamp(nb.y, 0.0, 1.0 - nb.h);
        }
        nf.boxes.push_back(nb);
      }
      const int n_spurious = rng.poisson(pcfg.spurious_rate);
      for (int k = 0; k < n_spurious; ++k) {
        const double w = rng.uniform(0.05, 0.18);
        const double h = rng.uniform(0.05, 0.18);
        const double x = rng.uniform(0.0, 1.0 - w);
        const double y = rng.uniform(0.0, 1.0 - h);
        nf.boxes.push_back({x, y, w, h, rng.uniform()});
      }
      rec.frames.push_back(std::move(nf));
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace gada
