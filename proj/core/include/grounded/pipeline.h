#ifndef GROUNDED_PIPELINE_H_
#define GROUNDED_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grounded/corpus_io.h"
#include "grounded/optimizer.h"
#include "grounded/raw_video.h"
#include "grounded/shot_boundary.h"
#include "grounded/synth.h"
#include "grounded/tracker.h"
#include "grounded/types.h"

namespace grounded {

// Stage names in execution order.
inline const std::vector<std::string> kPipelineStages = {
    "synth", "shots", "fit-pairwise", "track",
    "link",  "train", "generate",     "eval"};

struct PipelineConfig {
  std::uint64_t seed = 1;
  SynthConfig synth;

  // Both unset means the thresholds are fit on the training clips.
  std::optional<double> theta_hist;
  std::optional<double> theta_survive;
  ShotOptions shots{.bins = 16, .patch_size = 5, .search_radius = 2};

  PairwiseFitOptions pairwise;
  TrackerOptions tracker;

  int linker_epochs = 40;
  int linker_batch_size = 16;
  int linker_embedding = 16;
  int linker_hidden = 32;
  double linker_lambda = 1.0;
  double linker_learning_rate = 5e-3;

  int hidden = 128;
  int embedding = 64;
  int attention = 64;
  int epochs = 30;
  int batch_size = 8;
  double attention_weight = 1.0;
  OptimizerOptions optimizer;
  int c_max = kMaxCurrentTracks;
  int p_max = kMaxPreviousTracks;
  int max_length = 30;

  std::vector<std::string> stages = kPipelineStages;
  std::filesystem::path out_dir = "out";
};

// Flat JSON object; unknown keys, wrong types and out-of-range values throw
// ConfigError. Missing keys keep their defaults.
PipelineConfig ConfigFromJson(const std::string& text);
PipelineConfig LoadConfig(const std::filesystem::path& path);
void ValidateConfig(const PipelineConfig& config);

// Every key with its effective value. Paths are left out when
// `include_paths` is false.
std::string ConfigToJson(const PipelineConfig& config,
                         bool include_paths = true);

// 16 hex digits over the path-free effective config.
std::string ConfigHash(const PipelineConfig& config);
ArtifactStamp StampOf(const PipelineConfig& config);

// Seed of the named per-stage random stream.
std::uint64_t StageSeed(const PipelineConfig& config, const std::string& stage);

// File locations of every artifact; defaults live under the output
// directory.
struct ArtifactPaths {
  std::filesystem::path corpus;      // synthetic clips with gold tracks
  std::filesystem::path raw;         // frames, detections, annotations
  std::filesystem::path boundaries;  // shot boundaries per clip
  std::filesystem::path pairwise;    // detection-pair model
  std::filesystem::path tracks;      // clips with tracked, normalized tracks
  std::filesystem::path norm;
  std::filesystem::path recall;
  std::filesystem::path alpha_gt;
  std::filesystem::path linking;
  std::filesystem::path model;
  std::filesystem::path pred;
  std::filesystem::path gt;
  std::filesystem::path grounding;
  std::optional<std::filesystem::path> prev_grounding;
  std::filesystem::path report;

  static ArtifactPaths Under(const std::filesystem::path& dir);
};

// Each stage reads only persisted artifacts and wraps any failure in a
// StageError naming itself; ConfigError passes through unchanged. Progress
// and warnings go to `log` when given.
void RunSynthStage(const PipelineConfig& config, const ArtifactPaths& paths,
                   std::ostream* log = nullptr);
void RunShotsStage(const PipelineConfig& config, const ArtifactPaths& paths,
                   std::ostream* log = nullptr);
void RunFitPairwiseStage(const PipelineConfig& config,
                         const ArtifactPaths& paths, std::ostream* log = nullptr);
void RunTrackStage(const PipelineConfig& config, const ArtifactPaths& paths,
                   std::ostream* log = nullptr);
void RunLinkStage(const PipelineConfig& config, const ArtifactPaths& paths,
                  std::ostream* log = nullptr);
void RunTrainStage(const PipelineConfig& config, const ArtifactPaths& paths,
                   std::ostream* log = nullptr);
void RunGenerateStage(const PipelineConfig& config, const ArtifactPaths& paths,
                      std::ostream* log = nullptr);
void RunEvalStage(const PipelineConfig& config, const ArtifactPaths& paths,
                  std::ostream* log = nullptr);

void RunStage(const std::string& stage, const PipelineConfig& config,
              const ArtifactPaths& paths, std::ostream* log = nullptr);

// Runs config.stages in order, creating the output directory first.
void RunPipeline(const PipelineConfig& config, const ArtifactPaths& paths,
                 std::ostream* log = nullptr);

// Pipeline tracks are bound to characters through the annotated heads they
// cover: a track belongs to the character whose annotations match (same
// frame, IOU >= 0.5) most of its detections, if they match at least half.
// Mention ground truth is replaced by the tracks of its character.
void RebindMentions(Clip& clip, std::span<const Annotation> annotations);

}  // namespace grounded

#endif  // GROUNDED_PIPELINE_H_
