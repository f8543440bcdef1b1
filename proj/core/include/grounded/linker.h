#ifndef GROUNDED_LINKER_H_
#define GROUNDED_LINKER_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grounded/corpus_io.h"
#include "grounded/lstm.h"
#include "grounded/optimizer.h"
#include "grounded/rng.h"
#include "grounded/types.h"

namespace grounded {

struct LinkerDims {
  int d_head = 0;
  int num_names = 0;  // known name ids; one extra slot holds unknown names
  int embedding = 16;
  int hidden = 32;
  int scorer = 32;
  int recon = 32;
};

// Token table rows: 0 = male, 1 = female, 2.. = names, last = unknown name.
struct LinkerParams {
  Matrix embedding;
  Matrix lstm_w, lstm_b;
  Matrix w_m, w_t, b_s, w_s;  // scorer
  Matrix w_r, b_r;            // reconstruction trunk
  Matrix w_g, b_g;            // gender head
  Matrix w_n, b_n;            // name head

  template <typename F>
  void ForEach(F&& f) {
    f("embedding", embedding);
    f("lstm_w", lstm_w);
    f("lstm_b", lstm_b);
    f("w_m", w_m);
    f("w_t", w_t);
    f("b_s", b_s);
    f("w_s", w_s);
    f("w_r", w_r);
    f("b_r", b_r);
    f("w_g", w_g);
    f("b_g", b_g);
    f("w_n", w_n);
    f("b_n", b_n);
  }
};

LinkerParams InitLinkerParams(const LinkerDims& dims, Rng& rng);

// One mention to localize among the tracks of its clip.
struct LinkInstance {
  Gender gender = Gender::kMale;
  int name = 0;  // index into the name table, num_names for unknown
  std::vector<const Vec*> tracks;  // v_head per candidate
  // Track index known to be correct (one name, one track clips).
  std::optional<int> supervised;
};

struct LinkResult {
  Vec attention;
  int best = 0;
};

class Linker {
 public:
  Linker() = default;
  Linker(LinkerDims dims, std::map<int, int> name_index, LinkerParams params)
      : dims_(dims), name_index_(std::move(name_index)), params_(std::move(params)) {}

  const LinkerDims& dims() const { return dims_; }
  LinkerParams& params() { return params_; }
  const LinkerParams& params() const { return params_; }
  int NameIndex(int character_id) const;

  // Throws std::invalid_argument when there are no tracks.
  LinkResult Link(Gender gender, int character_id,
                  std::span<const Vec* const> tracks) const;
  LinkResult Link(const LinkInstance& inst) const;

  // Reconstruction NLL of (gender, name) plus lambda times the attention
  // NLL of the supervised track. Adds gradients to `grads` when given.
  double Loss(const LinkInstance& inst, double lambda,
              LinkerParams* grads) const;

 private:
  LinkerDims dims_;
  std::map<int, int> name_index_;
  LinkerParams params_;
};

struct LinkerTrainOptions {
  LinkerDims dims;
  int epochs = 40;
  int batch_size = 16;
  double lambda = 1.0;
  OptimizerOptions optimizer;
  std::string train_split = "train";
};

struct LinkerTrainReport {
  std::vector<double> epoch_loss;
  int instances = 0;
  int supervised_instances = 0;
  std::vector<std::string> warnings;
};

// Builds the instances of every mention with at least one track in the
// requested split (all clips when split is empty).
std::vector<LinkInstance> MakeLinkInstances(const Linker& linker,
                                            const Corpus& corpus,
                                            const std::string& split);

// Corpus features are used as given; callers normalize beforehand.
Linker TrainLinker(const Corpus& corpus, const LinkerTrainOptions& options,
                   Rng& rng, LinkerTrainReport* report = nullptr);

// Fraction of mentions (with ground truth, in `split`) whose argmax track is
// among the ground-truth tracks.
double LinkingAccuracy(const Linker& linker, const Corpus& corpus,
                       const std::string& split);

// Linked track id per mention of every clip; nullopt for clips without
// tracks.
using LinkedMentions = std::map<std::string, std::vector<std::optional<int>>>;
LinkedMentions LinkCorpus(const Linker& linker, const Corpus& corpus);

// Attention target for one person word. `c` is empty when unsupervised;
// `p` is a previous-clip track id or 0 for the null track.
struct AlphaTarget {
  std::string pair_id;  // id of the current clip
  int tau = 0;          // token position in the current sentence
  int p = 0;
  std::optional<int> c;
  std::vector<int> prev_tracks;  // previous-track candidates of this clip

  friend bool operator==(const AlphaTarget&, const AlphaTarget&) = default;
};

// Previous-track candidates: the tracks linked in the previous sentence, or
// the 7 largest by length times mean area when none were linked.
std::vector<int> PreviousCandidates(const Clip& previous,
                                    std::span<const std::optional<int>> linked,
                                    int p_max = kMaxPreviousTracks);
std::vector<int> LargestTracks(const Clip& clip, int count);

std::vector<AlphaTarget> BuildAttentionGt(const Corpus& corpus,
                                          const LinkedMentions& linked,
                                          int p_max = kMaxPreviousTracks);

std::string AlphaTargetToJsonLine(const AlphaTarget& t);
std::vector<AlphaTarget> ReadAlphaGt(const std::filesystem::path& path);
void WriteAlphaGt(std::span<const AlphaTarget> targets,
                  const std::filesystem::path& path,
                  const std::optional<ArtifactStamp>& stamp = std::nullopt);

}  // namespace grounded

#endif  // GROUNDED_LINKER_H_
