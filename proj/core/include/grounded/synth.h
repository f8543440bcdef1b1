#ifndef GROUNDED_SYNTH_H_
#define GROUNDED_SYNTH_H_

#include <array>
#include <cstdint>
#include <vector>

#include "grounded/raw_video.h"
#include "grounded/rng.h"
#include "grounded/types.h"

namespace grounded {

struct Character {
  int id = 0;
  Gender gender = Gender::kMale;
  Vec head_center;  // coordinate 0 is +1 for male, -1 for female
  Vec body_center;
};

// Knobs of the synthetic movie corpus. Every movie is a pair of clips; the
// second clip may mention characters of the first, which makes them
// co-references.
struct SynthConfig {
  int num_pairs = 60;
  int num_characters = 12;  // identity pool shared by all movies
  int cast_size = 4;        // characters per movie
  int d_head = 64;
  int d_body = 64;
  int d_global = 263;
  double sigma = 0.1;   // appearance noise around character centers
  double margin = 1.0;  // minimum distance between head centers
  int distractors = 3;  // background tracks per clip, drawn from 0..n
  double share_prob = 0.6;  // chance a second-clip slot reuses a character
  double two_person_prob = 0.4;
  int max_mentions = 2;
  double singleton_prob = 0.15;  // one track, one name
  double split_track_prob = 0.1;  // a described track broken by a gap
  double test_fraction = 0.25;    // trailing movies form the test split
  int frames_per_clip = 32;
  double cut_prob = 0.3;
  std::array<double, 2> frame_size = {640.0, 360.0};
  // Single-person clips place the character near a side and a background
  // track near the frame center.
  bool off_center_single = false;

  // Detector-level stream.
  bool render_raw = true;
  double thumb_scale = 0.1;
  double crop_noise = 0.05;    // per-detection appearance noise
  double miss_prob = 0.05;     // detector misses a planted head
  double spurious_prob = 0.3;  // per frame, a detection the filter rejects
};

// Throws ConfigError on out-of-range values or an unreachable margin.
void ValidateSynthConfig(const SynthConfig& config);

// Head centers are rejection-sampled to respect the margin; ConfigError when
// sampling keeps failing.
std::vector<Character> SampleCharacters(const SynthConfig& config, Rng& rng);

struct SyntheticData {
  std::vector<Character> characters;
  Corpus corpus;              // ground-truth tracks, unnormalized features
  std::vector<RawClip> raw;   // empty unless config.render_raw
};

inline const std::array<const char*, 8> kVerbs = {
    "walks", "runs", "sits", "looks", "smiles", "turns", "opens", "holds"};
inline const std::array<const char*, 8> kObjects = {
    "door", "car", "phone", "window", "table", "glass", "book", "bag"};

SyntheticData GenerateSynthetic(const SynthConfig& config, std::uint64_t seed);
// Same corpus as GenerateSynthetic, without the detector-level stream.
Corpus GenerateCorpus(const SynthConfig& config, std::uint64_t seed);

}  // namespace grounded

#endif  // GROUNDED_SYNTH_H_
