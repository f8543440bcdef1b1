#include "grounded/pipeline.h"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>

#include "grounded/decoder.h"
#include "grounded/errors.h"
#include "grounded/eval.h"
#include "grounded/linker.h"
#include "grounded/track_repr.h"
#include "json_util.h"

namespace grounded {
namespace {

using internal::Json;

// Assignment from JSON with the key named in errors.
void Assign(int& dst, const Json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  dst = v.get<int>();
}

void Assign(double& dst, const Json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  dst = v.get<double>();
}

void Assign(bool& dst, const Json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
  dst = v.get<bool>();
}

void Assign(std::uint64_t& dst, const Json& v, const std::string& key) {
  if (!v.is_number_unsigned()) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  dst = v.get<std::uint64_t>();
}

void Assign(std::optional<double>& dst, const Json& v, const std::string& key) {
  if (v.is_null()) {
    dst.reset();
    return;
  }
  double d = 0.0;
  Assign(d, v, key);
  dst = d;
}

void Assign(std::filesystem::path& dst, const Json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  dst = v.get<std::string>();
}

void Assign(std::vector<std::string>& dst, const Json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("config key '" + key + "' must be a list of strings");
  dst.clear();
  for (const Json& s : v) {
    if (!s.is_string()) throw ConfigError("config key '" + key + "' must be a list of strings");
    dst.push_back(s.get<std::string>());
  }
}

void Assign(OptimizerKind& dst, const Json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  try {
    dst = ParseOptimizerKind(v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Json ToJson(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }
Json ToJson(const std::filesystem::path& p) { return p.generic_string(); }
Json ToJson(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd"; }
template <typename T>
Json ToJson(const T& v) {
  return Json(v);
}

struct Field {
  std::string key;
  bool is_path = false;
  std::function<Json(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const Json&)> set;
};

// `access` is a generic lambda returning a reference into the config, so
// the same accessor serves reads and writes.
template <typename Access>
Field MakeField(std::string key, Access access, bool is_path = false) {
  Field f;
  f.key = key;
  f.is_path = is_path;
  f.get = [access](const PipelineConfig& c) { return ToJson(access(c)); };
  f.set = [access, key](PipelineConfig& c, const Json& v) { Assign(access(c), v, key); };
  return f;
}

#define GROUNDED_FIELD(key, expr) \
  MakeField(key, [](auto& c) -> auto& { return c.expr; })

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      GROUNDED_FIELD("seed", seed),
      GROUNDED_FIELD("num_pairs", synth.num_pairs),
      GROUNDED_FIELD("num_characters", synth.num_characters),
      GROUNDED_FIELD("cast_size", synth.cast_size),
      GROUNDED_FIELD("d_head", synth.d_head),
      GROUNDED_FIELD("d_body", synth.d_body),
      GROUNDED_FIELD("d_global", synth.d_global),
      GROUNDED_FIELD("sigma", synth.sigma),
      GROUNDED_FIELD("margin", synth.margin),
      GROUNDED_FIELD("distractors", synth.distractors),
      GROUNDED_FIELD("share_prob", synth.share_prob),
      GROUNDED_FIELD("two_person_prob", synth.two_person_prob),
      GROUNDED_FIELD("max_mentions", synth.max_mentions),
      GROUNDED_FIELD("singleton_prob", synth.singleton_prob),
      GROUNDED_FIELD("split_track_prob", synth.split_track_prob),
      GROUNDED_FIELD("test_fraction", synth.test_fraction),
      GROUNDED_FIELD("frames_per_clip", synth.frames_per_clip),
      GROUNDED_FIELD("cut_prob", synth.cut_prob),
      GROUNDED_FIELD("frame_width", synth.frame_size[0]),
      GROUNDED_FIELD("frame_height", synth.frame_size[1]),
      GROUNDED_FIELD("off_center_single", synth.off_center_single),
      GROUNDED_FIELD("thumb_scale", synth.thumb_scale),
      GROUNDED_FIELD("crop_noise", synth.crop_noise),
      GROUNDED_FIELD("miss_prob", synth.miss_prob),
      GROUNDED_FIELD("spurious_prob", synth.spurious_prob),
      GROUNDED_FIELD("theta_hist", theta_hist),
      GROUNDED_FIELD("theta_survive", theta_survive),
      GROUNDED_FIELD("shot_bins", shots.bins),
      GROUNDED_FIELD("shot_patch_size", shots.patch_size),
      GROUNDED_FIELD("shot_search_radius", shots.search_radius),
      GROUNDED_FIELD("shot_max_corners", shots.max_corners),
      GROUNDED_FIELD("shot_ssd_threshold", shots.ssd_threshold),
      GROUNDED_FIELD("pairwise_iterations", pairwise.iterations),
      GROUNDED_FIELD("pairwise_learning_rate", pairwise.learning_rate),
      GROUNDED_FIELD("pairwise_l2", pairwise.l2),
      GROUNDED_FIELD("beta", tracker.beta),
      GROUNDED_FIELD("min_track_length", tracker.min_length),
      GROUNDED_FIELD("linker_epochs", linker_epochs),
      GROUNDED_FIELD("linker_batch_size", linker_batch_size),
      GROUNDED_FIELD("linker_embedding", linker_embedding),
      GROUNDED_FIELD("linker_hidden", linker_hidden),
      GROUNDED_FIELD("linker_lambda", linker_lambda),
      GROUNDED_FIELD("linker_learning_rate", linker_learning_rate),
      GROUNDED_FIELD("hidden", hidden),
      GROUNDED_FIELD("embedding", embedding),
      GROUNDED_FIELD("attention", attention),
      GROUNDED_FIELD("epochs", epochs),
      GROUNDED_FIELD("batch_size", batch_size),
      GROUNDED_FIELD("attention_weight", attention_weight),
      GROUNDED_FIELD("optimizer", optimizer.kind),
      GROUNDED_FIELD("learning_rate", optimizer.learning_rate),
      GROUNDED_FIELD("clip_norm", optimizer.clip_norm),
      GROUNDED_FIELD("c_max", c_max),
      GROUNDED_FIELD("p_max", p_max),
      GROUNDED_FIELD("max_length", max_length),
      GROUNDED_FIELD("stages", stages),
      MakeField("out_dir", [](auto& c) -> auto& { return c.out_dir; }, true),
  };
  return fields;
}

#undef GROUNDED_FIELD

void Check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::string Hex(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, x);
  return buf;
}

void Log(std::ostream* log, const std::string& stage, const std::string& msg) {
  if (log != nullptr) *log << "[" << stage << "] " << msg << "\n";
}

std::string Fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

// Runs `body` and turns any failure other than a config error into a
// StageError naming `stage`.
template <typename Body>
void Guard(const std::string& stage, Body&& body) {
  try {
    body();
  } catch (const ConfigError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

Json ReadJsonFile(const std::filesystem::path& path) {
  const std::string text = internal::ReadFile(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(path.string() + ": malformed JSON: " + e.what());
  }
}

void WriteJsonFile(const std::filesystem::path& path, Json j,
                   const ArtifactStamp& stamp) {
  j["_meta"] = internal::StampJson(stamp);
  internal::WriteFile(path, j.dump(2) + "\n");
}

const Json& Member(const Json& j, const std::string& key,
                   const std::filesystem::path& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw std::runtime_error(path.string() + ": missing field '" + key + "'");
  }
  return j.at(key);
}

Corpus ReadCorpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return ParseCorpusJsonl(in);
}

std::map<std::string, std::vector<int>> ReadBoundaries(
    const std::filesystem::path& path) {
  const Json j = ReadJsonFile(path);
  std::map<std::string, std::vector<int>> out;
  for (const Json& c : Member(j, "clips", path)) {
    internal::FieldReader r(1, "clips");
    out[r.String(r.Require(c, "id"), "id")] =
        r.Integers(r.Require(c, "boundaries"), "boundaries");
  }
  return out;
}

GroundingMap ReadGrounding(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  GroundingMap out;
  internal::ForEachJsonLine(in, [&](const Json& j, int line) {
    internal::FieldReader r(line, "");
    out[r.String(r.Require(j, "id"), "id")] =
        r.Integers(r.Require(j, "tracks"), "tracks");
  });
  return out;
}

void WriteGrounding(const GroundingMap& grounding,
                    std::span<const ClipPrediction> order,
                    const std::filesystem::path& path, const ArtifactStamp& stamp) {
  std::string text = MetaLine(stamp) + "\n";
  for (const ClipPrediction& p : order) {
    const Json line = {{"id", p.id}, {"tracks", grounding.at(p.id)}};
    text += line.dump() + "\n";
  }
  internal::WriteFile(path, text);
}

std::vector<Detection> DetectionsOf(const RawClip& raw) {
  std::vector<Detection> out;
  out.reserve(raw.detections.size());
  for (const RawDetection& d : raw.detections) out.push_back(d.det);
  return out;
}

}  // namespace

PipelineConfig ConfigFromJson(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::map<std::string, const Field*> by_key;
  for (const Field& f : Fields()) by_key[f.key] = &f;
  PipelineConfig config;
  for (const auto& [key, value] : j.items()) {
    auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second->set(config, value);
  }
  ValidateConfig(config);
  return config;
}

PipelineConfig LoadConfig(const std::filesystem::path& path) {
  std::string text;
  try {
    text = internal::ReadFile(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return ConfigFromJson(text);
}

void ValidateConfig(const PipelineConfig& c) {
  ValidateSynthConfig(c.synth);
  Check(c.theta_hist.has_value() == c.theta_survive.has_value(),
        "theta_hist and theta_survive must be given together");
  Check(!c.theta_hist || *c.theta_hist >= 0.0, "theta_hist must be >= 0");
  Check(!c.theta_survive || (*c.theta_survive >= 0.0 && *c.theta_survive <= 1.0),
        "theta_survive must lie in [0, 1]");
  Check(c.shots.bins >= 2, "shot_bins must be >= 2");
  Check(c.shots.patch_size >= 1 && c.shots.patch_size % 2 == 1,
        "shot_patch_size must be a positive odd number");
  Check(c.shots.search_radius >= 0, "shot_search_radius must be >= 0");
  Check(c.shots.max_corners >= 0, "shot_max_corners must be >= 0");
  Check(c.shots.ssd_threshold > 0.0, "shot_ssd_threshold must be > 0");
  Check(c.pairwise.iterations >= 1 && c.pairwise.learning_rate > 0.0 &&
            c.pairwise.l2 >= 0.0,
        "pairwise fit options out of range");
  Check(c.tracker.min_length >= 1, "min_track_length must be >= 1");
  Check(c.linker_epochs >= 1 && c.linker_batch_size >= 1 &&
            c.linker_embedding >= 1 && c.linker_hidden >= 1,
        "linker sizes must be >= 1");
  Check(c.linker_lambda >= 0.0 && c.linker_learning_rate > 0.0,
        "linker_lambda must be >= 0 and linker_learning_rate > 0");
  Check(c.hidden >= 1 && c.embedding >= 1 && c.attention >= 1,
        "decoder sizes must be >= 1");
  Check(c.epochs >= 1 && c.batch_size >= 1, "epochs and batch_size must be >= 1");
  Check(c.attention_weight >= 0.0, "attention_weight must be >= 0");
  Check(c.optimizer.learning_rate > 0.0, "learning_rate must be > 0");
  Check(c.c_max >= 1 && c.c_max <= kMaxCurrentTracks,
        "c_max must lie in [1, " + std::to_string(kMaxCurrentTracks) + "]");
  Check(c.p_max >= 0, "p_max must be >= 0");
  Check(c.max_length >= 1, "max_length must be >= 1");
  Check(!c.stages.empty(), "stages must not be empty");
  int last = -1;
  for (const std::string& s : c.stages) {
    auto it = std::find(kPipelineStages.begin(), kPipelineStages.end(), s);
    Check(it != kPipelineStages.end(), "unknown stage '" + s + "'");
    const int pos = static_cast<int>(it - kPipelineStages.begin());
    Check(pos > last, "stages must be distinct and in pipeline order");
    last = pos;
  }
  Check(!c.out_dir.empty(), "out_dir must not be empty");
}

std::string ConfigToJson(const PipelineConfig& config, bool include_paths) {
  Json j = Json::object();
  for (const Field& f : Fields()) {
    if (f.is_path && !include_paths) continue;
    j[f.key] = f.get(config);
  }
  return j.dump(2);
}

std::string ConfigHash(const PipelineConfig& config) {
  return Hex(Fnv1a64(ConfigToJson(config, false)));
}

ArtifactStamp StampOf(const PipelineConfig& config) {
  return {ConfigHash(config), config.seed};
}

std::uint64_t StageSeed(const PipelineConfig& config, const std::string& stage) {
  return Rng(config.seed).Substream(stage).seed();
}

ArtifactPaths ArtifactPaths::Under(const std::filesystem::path& dir) {
  ArtifactPaths p;
  p.corpus = dir / "corpus.jsonl";
  p.raw = dir / "raw.jsonl";
  p.boundaries = dir / "boundaries.json";
  p.pairwise = dir / "pairwise.json";
  p.tracks = dir / "tracks.jsonl";
  p.norm = dir / "norm.json";
  p.recall = dir / "recall.json";
  p.alpha_gt = dir / "alpha_gt.jsonl";
  p.linking = dir / "linking.json";
  p.model = dir / "decoder.ckpt";
  p.pred = dir / "pred.jsonl";
  p.gt = dir / "gt.jsonl";
  p.grounding = dir / "grounding.jsonl";
  p.report = dir / "report.json";
  return p;
}

void RunSynthStage(const PipelineConfig& config, const ArtifactPaths& paths,
                   std::ostream* log) {
  Guard("synth", [&] {
    SynthConfig sc = config.synth;
    sc.render_raw = true;
    const SyntheticData data = GenerateSynthetic(sc, StageSeed(config, "synth"));
    const ArtifactStamp stamp = StampOf(config);
    ExportJsonl(data.corpus, paths.corpus, stamp);
    WriteRawJsonl(data.raw, paths.raw, stamp);
    Log(log, "synth", std::to_string(data.corpus.clips.size()) + " clips");
  });
}

void RunShotsStage(const PipelineConfig& config, const ArtifactPaths& paths,
                   std::ostream* log) {
  Guard("shots", [&] {
    const std::vector<RawClip> raw = ReadRawJsonl(paths.raw);
    std::vector<std::vector<TransitionCues>> cues;
    cues.reserve(raw.size());
    std::vector<TransitionCues> train_cues;
    std::vector<std::uint8_t> train_labels;
    for (const RawClip& clip : raw) {
      cues.push_back(ComputeTransitionCues(clip.frames, config.shots));
      if (clip.split != "train") continue;
      for (std::size_t i = 0; i < cues.back().size(); ++i) {
        train_cues.push_back(cues.back()[i]);
        train_labels.push_back(std::count(clip.boundaries.begin(),
                                          clip.boundaries.end(),
                                          static_cast<int>(i)) > 0);
      }
    }
    ShotThresholds th;
    const bool fitted = !config.theta_hist.has_value();
    if (fitted) {
      if (train_cues.empty()) throw std::runtime_error("no training transitions to fit on");
      th = FitShotThresholds(train_cues, train_labels);
    } else {
      th.theta_hist = *config.theta_hist;
      th.theta_survive = *config.theta_survive;
    }
    Json clips = Json::array();
    // Held-out score pools all test transitions; frame offsets keep clips
    // apart.
    std::vector<int> predicted, truth;
    int offset = 0;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      const std::vector<int> b = DetectBoundaries(cues[k], th.theta_hist, th.theta_survive);
      clips.push_back({{"id", raw[k].id}, {"boundaries", b}});
      if (raw[k].split == "train") continue;
      for (int x : b) predicted.push_back(offset + x);
      for (int x : raw[k].boundaries) truth.push_back(offset + x);
      offset += static_cast<int>(raw[k].frames.size()) + 1;
    }
    const PrfScore held_out = BoundaryScore(predicted, truth);
    Json j = {{"theta_hist", th.theta_hist},
              {"theta_survive", th.theta_survive},
              {"fitted", fitted},
              {"held_out_f1", held_out.f1},
              {"clips", clips}};
    if (fitted) j["train_f1"] = th.f1;
    WriteJsonFile(paths.boundaries, j, StampOf(config));
    Log(log, "shots", "theta_hist " + Fmt(th.theta_hist) + ", theta_survive " +
                          Fmt(th.theta_survive) + ", held-out F " + Fmt(held_out.f1));
  });
}

void RunFitPairwiseStage(const PipelineConfig& config, const ArtifactPaths& paths,
                         std::ostream* log) {
  Guard("fit-pairwise", [&] {
    const std::vector<RawClip> raw = ReadRawJsonl(paths.raw);
    std::vector<LabeledPair> pairs;
    for (const RawClip& clip : raw) {
      if (clip.split != "train") continue;
      const std::vector<LabeledPair> p = TrainingPairs(clip.detections, clip.boundaries);
      pairs.insert(pairs.end(), p.begin(), p.end());
    }
    const PairwiseModel model = FitPairwiseModel(pairs, config.pairwise);
    Json j = Json::parse(PairwiseModelToJson(model));
    const double accuracy = PairwiseAccuracy(model, pairs);
    j["train_accuracy"] = accuracy;
    j["train_pairs"] = pairs.size();
    WriteJsonFile(paths.pairwise, j, StampOf(config));
    Log(log, "fit-pairwise", std::to_string(pairs.size()) + " pairs, train accuracy " +
                                 Fmt(accuracy));
  });
}

void RebindMentions(Clip& clip, std::span<const Annotation> annotations) {
  std::map<int, std::vector<int>> tracks_of;
  for (const Track& t : clip.tracks) {
    std::map<int, int> votes;
    for (const Detection& d : t.detections) {
      double best = 0.5;
      int who = 0;
      for (const Annotation& a : annotations) {
        if (a.frame != d.frame) continue;
        const double iou = Iou(a.box, d.box);
        if (iou >= best) {
          best = iou;
          who = a.character_id;
        }
      }
      if (who != 0) ++votes[who];
    }
    int owner = 0;
    int most = 0;
    for (const auto& [character, n] : votes) {
      if (n > most) {
        most = n;
        owner = character;
      }
    }
    if (owner != 0 && 2 * most >= t.length()) tracks_of[owner].push_back(t.id);
  }
  for (Mention& m : clip.mentions) {
    auto it = tracks_of.find(m.character_id);
    m.gt_track_ids = it == tracks_of.end() ? std::vector<int>{} : it->second;
  }
}

void RunTrackStage(const PipelineConfig& config, const ArtifactPaths& paths,
                   std::ostream* log) {
  Guard("track", [&] {
    const std::vector<RawClip> raw = ReadRawJsonl(paths.raw);
    const Corpus text = ReadCorpus(paths.corpus);
    const auto boundaries = ReadBoundaries(paths.boundaries);
    const PairwiseModel model = PairwiseModelFromJson(internal::ReadFile(paths.pairwise));
    if (!model.AllFinite()) throw std::runtime_error("pairwise model is not finite");

    Corpus corpus;
    std::vector<RecallMetrics> recall;
    int mentions = 0, bound = 0;
    for (const RawClip& r : raw) {
      const Clip* source = text.Find(r.id);
      if (source == nullptr) throw std::runtime_error("clip " + r.id + " has no sentence");
      auto b = boundaries.find(r.id);
      if (b == boundaries.end()) throw std::runtime_error("clip " + r.id + " has no boundaries");
      Clip clip = *source;
      clip.tracks = BuildTracks(r.detections, b->second, model, config.tracker).tracks;
      for (Track& t : clip.tracks) t.v_stat = TrackStats(t.detections);
      RebindMentions(clip, r.annotations);
      CapTracks(clip, config.c_max);
      recall.push_back(ComputeRecall(DetectionsOf(r), clip.tracks, r.annotations));
      for (const Mention& m : clip.mentions) {
        ++mentions;
        bound += !m.gt_track_ids.empty();
      }
      corpus.clips.push_back(std::move(clip));
    }
    if (corpus.clips.size() != text.clips.size()) {
      throw std::runtime_error("raw stream and corpus disagree on the clip count");
    }
    const NormStats norm = NormalizeDataset(corpus, "train");
    const ArtifactStamp stamp = StampOf(config);
    ExportJsonl(corpus, paths.tracks, stamp);
    WriteJsonFile(paths.norm, Json::parse(NormStatsToJson(norm)), stamp);
    const RecallMetrics all = CombineRecall(recall);
    WriteJsonFile(paths.recall,
                  {{"detection_recall", all.detection_recall},
                   {"track_recall", all.track_recall},
                   {"annotations", all.annotations},
                   {"detection_hits", all.detection_hits},
                   {"track_hits", all.track_hits},
                   {"mentions", mentions},
                   {"bound_mentions", bound}},
                  stamp);
    Log(log, "track", "track recall " + Fmt(all.track_recall) + ", " +
                          std::to_string(bound) + "/" + std::to_string(mentions) +
                          " mentions bound to tracks");
  });
}

void RunLinkStage(const PipelineConfig& config, const ArtifactPaths& paths,
                  std::ostream* log) {
  Guard("link", [&] {
    const Corpus corpus = ReadCorpus(paths.tracks);
    LinkerTrainOptions opt;
    opt.dims.embedding = config.linker_embedding;
    opt.dims.hidden = config.linker_hidden;
    opt.epochs = config.linker_epochs;
    opt.batch_size = config.linker_batch_size;
    opt.lambda = config.linker_lambda;
    opt.optimizer.learning_rate = config.linker_learning_rate;
    Rng rng(StageSeed(config, "link"));
    LinkerTrainReport report;
    const Linker linker = TrainLinker(corpus, opt, rng, &report);
    for (const std::string& w : report.warnings) Log(log, "link", "warning: " + w);
    const double test_accuracy = LinkingAccuracy(linker, corpus, "test");
    const double train_accuracy = LinkingAccuracy(linker, corpus, "train");
    const std::vector<AlphaTarget> alpha =
        BuildAttentionGt(corpus, LinkCorpus(linker, corpus), config.p_max);
    const ArtifactStamp stamp = StampOf(config);
    WriteAlphaGt(alpha, paths.alpha_gt, stamp);
    WriteJsonFile(paths.linking,
                  {{"test_accuracy", test_accuracy},
                   {"train_accuracy", train_accuracy},
                   {"instances", report.instances},
                   {"supervised_instances", report.supervised_instances},
                   {"final_loss", report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back()},
                   {"warnings", report.warnings}},
                  stamp);
    Log(log, "link", "held-out linking accuracy " + Fmt(test_accuracy));
  });
}

void RunTrainStage(const PipelineConfig& config, const ArtifactPaths& paths,
                   std::ostream* log) {
  Guard("train", [&] {
    const Corpus corpus = ReadCorpus(paths.tracks);
    const std::vector<AlphaTarget> alpha = ReadAlphaGt(paths.alpha_gt);
    const NormStats norm = NormStatsFromJson(internal::ReadFile(paths.norm));
    DecoderTrainOptions opt;
    opt.dims.hidden = config.hidden;
    opt.dims.embedding = config.embedding;
    opt.dims.attention = config.attention;
    opt.dims.c_max = config.c_max;
    opt.dims.p_max = config.p_max;
    opt.epochs = config.epochs;
    opt.batch_size = config.batch_size;
    opt.attention_weight = config.attention_weight;
    opt.optimizer = config.optimizer;
    opt.checkpoint_on_failure = paths.model.string() + ".diverged";
    Rng rng(StageSeed(config, "train"));
    DecoderTrainReport report;
    DecoderModel model = TrainDecoder(corpus, alpha, opt, rng, &report);
    model.norm = norm;
    SaveDecoder(model, paths.model, StampOf(config));
    Log(log, "train", std::to_string(report.examples) + " sentences, final loss " +
                          Fmt(report.epoch_loss.back()));
  });
}

void RunGenerateStage(const PipelineConfig& config, const ArtifactPaths& paths,
                      std::ostream* log) {
  Guard("generate", [&] {
    const DecoderModel model = LoadDecoder(paths.model);
    const Corpus corpus = ReadCorpus(paths.tracks);
    GroundingMap prev;
    if (paths.prev_grounding) prev = ReadGrounding(*paths.prev_grounding);
    DecodeOptions opt;
    opt.max_length = config.max_length;
    const std::vector<ClipPrediction> pred = DecodeCorpus(model, corpus, "test", prev, opt);
    const ArtifactStamp stamp = StampOf(config);
    WritePredictions(pred, paths.pred, stamp);
    WriteGroundTruth(BuildGroundTruth(corpus, "test"), paths.gt, stamp);
    WriteGrounding(GroundingOf(pred), pred, paths.grounding, stamp);
    Log(log, "generate", std::to_string(pred.size()) + " clips decoded, " +
                             std::to_string(CountPredictions(pred)) + " person groundings");
  });
}

void RunEvalStage(const PipelineConfig& config, const ArtifactPaths& paths,
                  std::ostream* log) {
  Guard("eval", [&] {
    const std::vector<ClipPrediction> pred = ReadPredictions(paths.pred);
    const std::vector<ClipGroundTruth> gt = ReadGroundTruth(paths.gt);
    const Corpus corpus = ReadCorpus(paths.tracks);
    RunReport report;
    report.model = F1Triad(pred, gt);
    report.consistency = ConsistencyRate(pred);
    report.person_predictions = CountPredictions(pred);
    report.clips = static_cast<int>(pred.size());
    for (Baseline b : {Baseline::kCenter, Baseline::kLxA, Baseline::kLxASim}) {
      report.baselines[BaselineName(b)] = F1Triad(RunBaselineOnCorpus(b, corpus, gt), gt);
    }
    if (std::filesystem::exists(paths.recall)) {
      const Json j = ReadJsonFile(paths.recall);
      RecallMetrics r;
      r.detection_recall = Member(j, "detection_recall", paths.recall).get<double>();
      r.track_recall = Member(j, "track_recall", paths.recall).get<double>();
      r.annotations = Member(j, "annotations", paths.recall).get<int>();
      r.detection_hits = Member(j, "detection_hits", paths.recall).get<int>();
      r.track_hits = Member(j, "track_hits", paths.recall).get<int>();
      report.recall = r;
    }
    if (std::filesystem::exists(paths.linking)) {
      report.linking_accuracy =
          Member(ReadJsonFile(paths.linking), "test_accuracy", paths.linking).get<double>();
    }
    report.stamp = StampOf(config);
    internal::WriteFile(paths.report, RunReportToJson(report));
    Log(log, "eval", "F1 ground " + Fmt(report.model.grounding.f1) + ", +coref " +
                         Fmt(report.model.coref.f1) + ", +word " +
                         Fmt(report.model.word.f1) + ", consistency " +
                         Fmt(report.consistency));
  });
}

void RunStage(const std::string& stage, const PipelineConfig& config,
              const ArtifactPaths& paths, std::ostream* log) {
  using StageFn = void (*)(const PipelineConfig&, const ArtifactPaths&, std::ostream*);
  static const std::map<std::string, StageFn> stages = {
      {"synth", &RunSynthStage},       {"shots", &RunShotsStage},
      {"fit-pairwise", &RunFitPairwiseStage}, {"track", &RunTrackStage},
      {"link", &RunLinkStage},         {"train", &RunTrainStage},
      {"generate", &RunGenerateStage}, {"eval", &RunEvalStage}};
  auto it = stages.find(stage);
  if (it == stages.end()) throw ConfigError("unknown stage '" + stage + "'");
  it->second(config, paths, log);
}

void RunPipeline(const PipelineConfig& config, const ArtifactPaths& paths,
                 std::ostream* log) {
  ValidateConfig(config);
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) {
    throw StageError(config.stages.front(),
                     "cannot create " + config.out_dir.string() + ": " + ec.message());
  }
  for (const std::string& stage : config.stages) RunStage(stage, config, paths, log);
}

}  // namespace grounded
