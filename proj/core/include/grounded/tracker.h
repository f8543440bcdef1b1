#ifndef GROUNDED_TRACKER_H_
#define GROUNDED_TRACKER_H_

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "grounded/corpus_io.h"
#include "grounded/multicut.h"
#include "grounded/types.h"

namespace grounded {

inline constexpr int kPairwiseDim = 8;
using PairwiseFeatureVec = std::array<double, kPairwiseDim>;

// [dx, dy, dh, iou, dx^2, dy^2, dh^2, iou^2] where the center and height
// differences are absolute and divided by the mean height of the two boxes.
PairwiseFeatureVec PairwiseFeature(const Box& a, const Box& b);

// Logistic model of the probability that two detections show the same
// person. Its log-odds serve as the multicut edge cost.
struct PairwiseModel {
  PairwiseFeatureVec weights{};
  double bias = 0.0;

  double LogOdds(const PairwiseFeatureVec& feature) const;
  double Probability(const PairwiseFeatureVec& feature) const;
  bool AllFinite() const;
  friend bool operator==(const PairwiseModel&, const PairwiseModel&) = default;
};

struct LabeledPair {
  PairwiseFeatureVec feature{};
  bool same = false;
};

// Raised when the training pairs hold only one class.
class DegenerateFitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PairwiseFitOptions {
  int iterations = 3000;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

// Full-batch gradient descent on the mean logistic loss over standardized
// features; the returned weights act on raw features.
PairwiseModel FitPairwiseModel(std::span<const LabeledPair> pairs,
                               const PairwiseFitOptions& options = {});
double PairwiseAccuracy(const PairwiseModel& model,
                        std::span<const LabeledPair> pairs);

std::string PairwiseModelToJson(const PairwiseModel& model);
PairwiseModel PairwiseModelFromJson(const std::string& text);

// One detector output with its crop appearance. `label` is an optional
// ground-truth identity (0 when unknown) used only to build training pairs.
struct RawDetection {
  Detection det;
  Vec v_head;
  Vec v_body;
  int label = 0;
};

// Shot index of every frame given boundaries (boundary i separates frames i
// and i + 1).
int ShotOf(int frame, std::span<const int> boundaries);

// Pairs of filtered detections on consecutive frames of one shot, labeled
// same when both carry the same positive label.
std::vector<LabeledPair> TrainingPairs(std::span<const RawDetection> detections,
                                       std::span<const int> boundaries);

struct TrackerOptions {
  double beta = 0.5;  // level-2 cut bias on cosine similarity
  int min_length = 5;  // distinct frames a level-1 track needs to survive
  MulticutOptions multicut;
};

struct TrackingResult {
  std::vector<Track> tracks;  // ids 1..n, ordered by first member
  // Indices into the input detections, per track, in input order.
  std::vector<std::vector<int>> members;
};

// Two-level clustering. Level 1 links filtered detections on consecutive
// frames within a shot using the pairwise model and drops short tracks.
// Level 2 joins the survivors over a complete graph with cost
// cos(mean v_head, mean v_head) - beta. Detections failing the detection
// filter are ignored.
TrackingResult BuildTracks(std::span<const RawDetection> detections,
                           std::span<const int> boundaries,
                           const PairwiseModel& model,
                           const TrackerOptions& options = {});

}  // namespace grounded

#endif  // GROUNDED_TRACKER_H_
