#ifndef GROUNDED_SHOT_BOUNDARY_H_
#define GROUNDED_SHOT_BOUNDARY_H_

#include <cstdint>
#include <span>
#include <vector>

#include "grounded/matrix.h"

namespace grounded {

// Interleaved 8-bit RGB image.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Frame() = default;
  Frame(int w, int h) : width(w), height(h), rgb(3 * w * h, 0) {}

  std::uint8_t& at(int x, int y, int ch) { return rgb[3 * (y * width + x) + ch]; }
  std::uint8_t at(int x, int y, int ch) const {
    return rgb[3 * (y * width + x) + ch];
  }
  friend bool operator==(const Frame&, const Frame&) = default;
};

struct CornerPoint {
  int x = 0;
  int y = 0;
  double response = 0.0;  // smaller eigenvalue of the structure tensor
};

struct FrameSignature {
  Vec histogram;  // 3 * bins entries, jointly L1-normalized
  std::vector<CornerPoint> corners;
};

struct ShotOptions {
  int bins = 32;
  int patch_size = 9;
  int search_radius = 16;
  int max_corners = 200;
  // A corner survives when its best match has mean squared gray-level
  // difference per pixel below this.
  double ssd_threshold = 100.0;
  // Corners need a response of at least this fraction of the frame maximum.
  double corner_quality = 0.01;
};

// Throws std::invalid_argument for an empty frame or bins < 2.
FrameSignature ComputeFrameSignature(const Frame& frame,
                                     const ShotOptions& options = {});

double HistogramDistance(std::span<const double> a, std::span<const double> b);

// Fraction of `first`'s corners whose best patch match in `second` lies
// under the SSD threshold. 1 when `first` has no corners.
double SurvivalRatio(const Frame& first, const FrameSignature& first_signature,
                     const Frame& second, const ShotOptions& options = {});

// Both cues for the transition between frame i and i + 1.
struct TransitionCues {
  double hist_distance = 0.0;
  double survival = 1.0;
};

std::vector<TransitionCues> ComputeTransitionCues(
    std::span<const Frame> frames, const ShotOptions& options = {});

// Boundary i means a cut between frames i and i + 1. A boundary is declared
// when the histogram distance exceeds theta_hist or the survival ratio falls
// below theta_survive.
std::vector<int> DetectBoundaries(std::span<const TransitionCues> cues,
                                  double theta_hist, double theta_survive);
std::vector<int> DetectBoundaries(std::span<const Frame> frames,
                                  double theta_hist, double theta_survive,
                                  const ShotOptions& options = {});

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PrfScore BoundaryScore(std::span<const int> predicted,
                       std::span<const int> truth);

struct ShotThresholds {
  double theta_hist = 0.0;
  double theta_survive = 0.0;
  double f1 = 0.0;
};

// Exhaustive search over label-change midpoints of both cues (plus values
// that disable a cue) maximizing the F-score on labeled transitions.
ShotThresholds FitShotThresholds(std::span<const TransitionCues> cues,
                                 std::span<const std::uint8_t> is_boundary);

}  // namespace grounded

#endif  // GROUNDED_SHOT_BOUNDARY_H_
