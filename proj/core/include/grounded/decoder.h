#ifndef GROUNDED_DECODER_H_
#define GROUNDED_DECODER_H_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "grounded/corpus_io.h"
#include "grounded/linker.h"
#include "grounded/lstm.h"
#include "grounded/optimizer.h"
#include "grounded/prediction.h"
#include "grounded/rng.h"
#include "grounded/track_repr.h"
#include "grounded/types.h"

namespace grounded {

struct DecoderDims {
  int d_head = 64;
  int d_body = 64;
  int d_stat = kStatDim;
  int d_global = 263;
  int hidden = 128;
  int embedding = 64;
  int attention = 64;
  int vocab = 0;
  int c_max = kMaxCurrentTracks;
  int p_max = kMaxPreviousTracks;

  // Width of v_grounded: [v_head, v_body, v_stat, v_id].
  int grounded() const { return 2 * d_head + d_body + d_stat; }
  int input() const { return grounded() + d_global + embedding; }
  friend bool operator==(const DecoderDims&, const DecoderDims&) = default;
};

struct DecoderParams {
  Matrix embedding;       // vocab x embedding
  Matrix lstm_w, lstm_b;  // input [v_grounded, v_global, w_prev]
  Matrix w_id, w_head, w_body, w_stat, b_v;
  Matrix w_h, b_h;
  Matrix w_alpha, b_alpha;
  Matrix w_pred, b_pred;

  template <typename F>
  void ForEach(F&& f) {
    f("embedding", embedding);
    f("lstm_w", lstm_w);
    f("lstm_b", lstm_b);
    f("w_id", w_id);
    f("w_head", w_head);
    f("w_body", w_body);
    f("w_stat", w_stat);
    f("b_v", b_v);
    f("w_h", w_h);
    f("b_h", b_h);
    f("w_alpha", w_alpha);
    f("b_alpha", b_alpha);
    f("w_pred", w_pred);
    f("b_pred", b_pred);
  }
};

DecoderParams InitDecoderParams(const DecoderDims& dims, Rng& rng);
// Throws std::invalid_argument when a tensor disagrees with `dims`.
void CheckDecoderShapes(DecoderParams& params, const DecoderDims& dims);

// Joint attention over (previous track or null, current track) cells, laid
// out on the full (p_max + 1) x c_max grid. Row 0 is the null track.
struct AttentionMap {
  Matrix alpha;   // padding cells hold exactly 0
  Matrix logits;  // padding cells hold -inf
  Vec v_grounded;
  bool defined = true;  // false when there are no current tracks
};

// One attention step from the previous hidden state. Throws
// std::invalid_argument when the track counts exceed the grid.
AttentionMap JointAttention(const DecoderParams& params,
                            const DecoderDims& dims, std::span<const double> h_prev,
                            std::span<const Track* const> current,
                            std::span<const Track* const> previous);

// Attention supervision for the word emitted at `step`; cell indices are
// into the example's previous (0 = null, i + 1 = previous[i]) and current
// track lists.
struct StepTarget {
  int step = 0;
  int p = 0;
  int c = 0;
};

// One sentence to learn: token indices without <bos>/<eos>.
struct DecoderExample {
  const Clip* clip = nullptr;
  std::vector<const Track*> current;
  std::vector<const Track*> previous;
  std::vector<int> tokens;
  std::vector<StepTarget> targets;
  int skipped_targets = 0;  // targets naming a missing track
};

std::vector<const Track*> CurrentTracks(const Clip& clip, int c_max);

// Builds examples for the clips of `split` (all clips when empty). Previous
// candidates come from the AlphaGT lines of each clip, else the largest
// tracks of the previous clip.
std::vector<DecoderExample> MakeDecoderExamples(
    const Corpus& corpus, const Vocabulary& vocab,
    std::span<const AlphaTarget> alpha_gt, const DecoderDims& dims,
    const std::string& split);

struct SentenceLoss {
  double total = 0.0;
  double word = 0.0;
  double attention = 0.0;
  int supervised = 0;
};

// Teacher-forced word NLL plus attention_weight times the NLL of each
// supervised cell. Adds gradients to `grads` when given.
SentenceLoss ComputeSentenceLoss(const DecoderParams& params,
                                 const DecoderDims& dims,
                                 const DecoderExample& example,
                                 double attention_weight,
                                 DecoderParams* grads);

struct DecoderModel {
  DecoderDims dims;
  Vocabulary vocab;
  DecoderParams params;
  std::optional<NormStats> norm;
};

struct DecoderTrainOptions {
  DecoderDims dims;  // feature widths and vocab size are taken from the data
  int epochs = 30;
  int batch_size = 8;
  double attention_weight = 1.0;  // 0 trains on words only
  OptimizerOptions optimizer;
  std::string train_split = "train";
  // Written with the last good parameters when training diverges.
  std::optional<std::filesystem::path> checkpoint_on_failure;
};

struct DecoderTrainReport {
  std::vector<double> epoch_loss;  // mean total loss per example
  std::vector<double> epoch_word_loss;
  std::vector<double> epoch_attention_loss;
  int examples = 0;
  int supervised_targets = 0;
  int skipped_targets = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The vocabulary is built from the training split. Throws TrainingDiverged
// (after restoring the last good parameters) when the loss turns
// non-finite.
DecoderModel TrainDecoder(const Corpus& corpus,
                          std::span<const AlphaTarget> alpha_gt,
                          const DecoderTrainOptions& options, Rng& rng,
                          DecoderTrainReport* report = nullptr);

// Fraction of supervised targets whose teacher-forced attention argmax hits
// the target cell.
double AttentionAccuracy(const DecoderModel& model,
                         std::span<const DecoderExample> examples);

struct DecodeOptions {
  int max_length = 30;
};

struct DecodeResult {
  std::vector<std::string> words;
  std::vector<GroundingPrediction> predictions;
  std::vector<Matrix> attention;  // grid per prediction
};

// Greedy decoding. A person word emitted while the clip has tracks records
// the argmax cell as its grounding.
DecodeResult DecodeClip(const DecoderModel& model, const Clip& clip,
                        std::span<const Track* const> previous,
                        const DecodeOptions& options = {});

// Grounded track ids per clip, used as the previous-track candidates of the
// clip that follows it.
using GroundingMap = std::map<std::string, std::vector<int>>;

// Decodes the clips of `split` (all when empty) in corpus order. The
// previous candidates of a clip are the grounding of its predecessor from
// `prev_grounding` when listed there, else the distinct tracks predicted
// while decoding the predecessor.
std::vector<ClipPrediction> DecodeCorpus(const DecoderModel& model,
                                         const Corpus& corpus,
                                         const std::string& split,
                                         const GroundingMap& prev_grounding = {},
                                         const DecodeOptions& options = {});

// Distinct predicted current tracks of each clip, in emission order.
GroundingMap GroundingOf(std::span<const ClipPrediction> predictions);

// Binary checkpoint: magic, header length, JSON header, then little-endian
// doubles per tensor.
void SaveDecoder(const DecoderModel& model, const std::filesystem::path& path,
                 const std::optional<ArtifactStamp>& stamp = std::nullopt);
DecoderModel LoadDecoder(const std::filesystem::path& path);

}  // namespace grounded

#endif  // GROUNDED_DECODER_H_
