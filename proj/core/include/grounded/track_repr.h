#ifndef GROUNDED_TRACK_REPR_H_
#define GROUNDED_TRACK_REPR_H_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grounded/types.h"

namespace grounded {

// Body box for a head box: 3x wider and 6x taller, horizontally centered on
// the head and sharing its top edge. Clipped to the frame when its size is
// given; a clipped box keeps at least one pixel in each dimension.
Box BodyRegion(const Box& head,
               std::optional<std::array<double, 2>> frame_size = std::nullopt);

// v_stat layout:
// [length, mean_w, std_w, mean_h, std_h, mean_cx, std_cx, mean_cy, std_cy,
//  mean_score, std_score]; standard deviations are population (divide by n).
Vec TrackStats(std::span<const Detection> detections);

// Per-dimension affine normalizer, (x - mean) / stddev.
struct FeatureNorm {
  Vec mean;
  Vec stddev;

  void Apply(Vec& x) const;
  friend bool operator==(const FeatureNorm&, const FeatureNorm&) = default;
};

// Standard deviations below this are replaced by 1.
inline constexpr double kStdFloor = 1e-8;

FeatureNorm FitFeatureNorm(const std::vector<const Vec*>& samples);

struct NormStats {
  FeatureNorm head;
  FeatureNorm body;
  FeatureNorm stat;

  void Apply(Track& track) const;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

// Fits on the tracks of clips whose split equals `fit_split`, then
// normalizes v_head, v_body and v_stat of every clip in place.
// Throws std::invalid_argument when the fitting split has no tracks.
NormStats NormalizeDataset(Corpus& corpus,
                           const std::string& fit_split = "train");
void ApplyNormStats(const NormStats& stats, Corpus& corpus);

// Fills v_stat for every track from its detections.
void ComputeTrackStats(Corpus& corpus);

std::string NormStatsToJson(const NormStats& stats);
NormStats NormStatsFromJson(const std::string& text);

}  // namespace grounded

#endif  // GROUNDED_TRACK_REPR_H_
