#ifndef GROUNDED_EVAL_H_
#define GROUNDED_EVAL_H_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grounded/corpus_io.h"
#include "grounded/prediction.h"
#include "grounded/raw_video.h"
#include "grounded/types.h"

namespace grounded {

// Ground truth for one person-word slot of a reference sentence. `prev`
// lists the previous-clip tracks of the co-referent character and is empty
// when the correct previous choice is the null track.
struct GroundTruthSlot {
  int tau = 0;
  std::string word;
  std::vector<int> tracks;
  std::vector<int> prev;

  friend bool operator==(const GroundTruthSlot&, const GroundTruthSlot&) = default;
};

struct ClipGroundTruth {
  std::string id;
  std::vector<GroundTruthSlot> slots;

  friend bool operator==(const ClipGroundTruth&, const ClipGroundTruth&) = default;
};

// One entry per clip of `split` (all clips when empty), in corpus order.
std::vector<ClipGroundTruth> BuildGroundTruth(const Corpus& corpus,
                                              const std::string& split);

struct LevelScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;  // 2PR / (P + R), 0 when P + R = 0
  int correct_predictions = 0;
  int predictions = 0;
  int covered_slots = 0;
  int slots = 0;
};

struct EvalReport {
  LevelScore grounding;  // current track only
  LevelScore coref;      // plus previous track
  LevelScore word;       // plus the person word
};

// A prediction is correct at a level when some slot of the same clip
// accepts it at that level; a slot is recalled when some prediction of its
// clip is accepted by it. Throws std::invalid_argument when the clip ids of
// the two sides differ, and std::logic_error if the levels are not
// monotone.
EvalReport F1Triad(std::span<const ClipPrediction> predictions,
                   std::span<const ClipGroundTruth> truth);

// Fraction of predictions where (p == 0) matches a Name word; 0 when empty.
double ConsistencyRate(std::span<const ClipPrediction> predictions);
int CountPredictions(std::span<const ClipPrediction> predictions);

enum class Baseline { kCenter, kLxA, kLxASim };
std::string BaselineName(Baseline b);

// One prediction per slot of `truth`. The word is the slot's gender with
// the Coref form exactly when a previous track was chosen. No predictions
// when the clip has no tracks.
ClipPrediction RunBaseline(Baseline strategy, const Clip& clip,
                           const Clip* previous, const ClipGroundTruth& truth,
                           int p_max = kMaxPreviousTracks);

std::vector<ClipPrediction> RunBaselineOnCorpus(
    Baseline strategy, const Corpus& corpus,
    std::span<const ClipGroundTruth> truth);

struct RecallMetrics {
  double detection_recall = 0.0;
  double track_recall = 0.0;
  int annotations = 0;
  int detection_hits = 0;
  int track_hits = 0;
};

// An annotated head is recalled by a detection (or a track detection) on
// the same frame with IOU >= 0.5. Detections failing the detection filter
// are ignored. Both recalls are 0 without annotations.
RecallMetrics ComputeRecall(std::span<const Detection> detections,
                            std::span<const Track> tracks,
                            std::span<const Annotation> annotations);
// Sums the counts of several clips.
RecallMetrics CombineRecall(std::span<const RecallMetrics> parts);

std::string ClipPredictionToJsonLine(const ClipPrediction& p);
std::vector<ClipPrediction> ReadPredictions(const std::filesystem::path& path);
void WritePredictions(std::span<const ClipPrediction> predictions,
                      const std::filesystem::path& path,
                      const std::optional<ArtifactStamp>& stamp = std::nullopt);

std::string ClipGroundTruthToJsonLine(const ClipGroundTruth& gt);
std::vector<ClipGroundTruth> ReadGroundTruth(const std::filesystem::path& path);
void WriteGroundTruth(std::span<const ClipGroundTruth> truth,
                      const std::filesystem::path& path,
                      const std::optional<ArtifactStamp>& stamp = std::nullopt);

struct RunReport {
  EvalReport model;
  double consistency = 0.0;
  int person_predictions = 0;
  int clips = 0;
  std::map<std::string, EvalReport> baselines;
  std::optional<RecallMetrics> recall;
  std::optional<double> linking_accuracy;
  std::optional<ArtifactStamp> stamp;
};

// Deterministic, pretty-printed JSON with no timestamps.
std::string RunReportToJson(const RunReport& report);

}  // namespace grounded

#endif  // GROUNDED_EVAL_H_
