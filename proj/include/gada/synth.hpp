#pragma once

#include <cstdint>
#include <string>

#include "gada/detection.hpp"

namespace gada {

// Seeded detection-stream generator. Positive videos carry one or more
// planted pathology tracks: a box of fixed size whose center performs a
// reflected Gaussian random walk. Track boxes are always written to gt and,
// unless dropped, also emitted as (jittered, confidence-weighted) detections.
// Every video additionally receives (a) low-confidence clutter and (b)
// coherent low-confidence distractor tracks that never enter gt - stand-ins
// for anatomy that a detector fires on consistently but weakly. Negatives may
// also receive a burst of high-confidence boxes at spatially incoherent
// locations. Distractors make graph structure alone class-ambiguous, and
// bursts do the same for frame-averaged confidence.
struct GeneratorConfig {
  int n_videos = 100;
  double positive_fraction = 0.5;
  int frames_min = 60;
  int frames_max = 180;
  int tracks_per_positive_min = 1;
  int tracks_per_positive_max = 1;
  int track_length_min = 15;
  int track_length_max = 35;
  double drift_sigma = 0.012;         // per-frame center walk, also detection jitter
  double track_conf_alpha = 4.0;      // Beta shape for track-box confidence
  double track_conf_beta = 2.0;
  double clutter_rate = 1.0;          // expected clutter boxes per frame
  double clutter_conf_alpha = 2.0;
  double clutter_conf_beta = 4.0;
  double detect_drop_prob = 0.15;     // track box not emitted as a detection
  double spurious_burst_prob = 0.75;  // negatives only: high-confidence burst
  int distractor_tracks = 1;          // both classes: coherent low-confidence tracks

  void validate() const;  // throws ConfigError
};

// Detection-quality perturbation: emulates swapping in a better or worse
// detector checkpoint. Labels and gt boxes are never touched.
struct PerturbConfig {
  double conf_noise_sigma = 0.0;  // additive Gaussian on c, clamped to [0,1]
  double box_jitter_sigma = 0.0;  // additive Gaussian on x,y,w,h, re-clamped
  double drop_prob = 0.0;         // each detection independently removed
  double spurious_rate = 0.0;     // expected extra random boxes per frame

  bool is_zero() const {
    return conf_noise_sigma == 0.0 && box_jitter_sigma == 0.0 && drop_prob == 0.0 &&
           spurious_rate == 0.0;
  }
  void validate() const;  // throws ConfigError
};

// Deterministic for fixed (config, seed): every video draws from its own
// stream derive_seed(seed, video_index), so order of generation is irrelevant.
// id_prefix names the videos ("<prefix>_00042").
Dataset generate_dataset(const GeneratorConfig& config, std::uint64_t seed,
                         const std::string& id_prefix = "video", Split split = Split::kTrain);

// Deterministic for fixed seed; per-video streams derived as in generation.
Dataset perturb_dataset(const Dataset& dataset, const PerturbConfig& pcfg, std::uint64_t seed);

}  // namespace gada
