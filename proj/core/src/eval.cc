#include "grounded/eval.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "grounded/linker.h"
#include "json_util.h"

namespace grounded {

using internal::FieldReader;
using internal::Json;

std::vector<ClipGroundTruth> BuildGroundTruth(const Corpus& corpus,
                                              const std::string& split) {
  std::vector<ClipGroundTruth> out;
  for (const Clip& clip : corpus.clips) {
    if (!split.empty() && clip.split != split) continue;
    ClipGroundTruth gt;
    gt.id = clip.id;
    const Clip* prev = corpus.Previous(clip);
    for (const Mention& m : clip.mentions) {
      GroundTruthSlot slot;
      slot.tau = m.position;
      slot.word = clip.sentence.at(m.position);
      slot.tracks = m.gt_track_ids;
      if (m.coref_prev && prev != nullptr) {
        for (const Mention& pm : prev->mentions) {
          if (pm.character_id != *m.coref_prev) continue;
          for (int id : pm.gt_track_ids) {
            if (std::find(slot.prev.begin(), slot.prev.end(), id) ==
                slot.prev.end()) {
              slot.prev.push_back(id);
            }
          }
        }
      }
      gt.slots.push_back(std::move(slot));
    }
    out.push_back(std::move(gt));
  }
  return out;
}

namespace {

bool Contains(const std::vector<int>& v, int x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// Highest level (0..3) at which `slot` accepts `pred`.
int Accepts(const GroundTruthSlot& slot, const GroundingPrediction& pred) {
  if (!Contains(slot.tracks, pred.c)) return 0;
  const bool prev_ok = slot.prev.empty() ? pred.p == 0 : Contains(slot.prev, pred.p);
  if (!prev_ok) return 1;
  return pred.word == slot.word ? 3 : 2;
}

void Finish(LevelScore& s) {
  s.precision = s.predictions == 0
                    ? 0.0
                    : static_cast<double>(s.correct_predictions) / s.predictions;
  s.recall = s.slots == 0 ? 0.0 : static_cast<double>(s.covered_slots) / s.slots;
  const double sum = s.precision + s.recall;
  s.f1 = sum == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / sum;
}

}  // namespace

EvalReport F1Triad(std::span<const ClipPrediction> predictions,
                   std::span<const ClipGroundTruth> truth) {
  std::map<std::string, const ClipGroundTruth*> by_id;
  for (const ClipGroundTruth& gt : truth) {
    if (!by_id.emplace(gt.id, &gt).second) {
      throw std::invalid_argument("duplicate ground-truth clip " + gt.id);
    }
  }
  std::set<std::string> seen;
  for (const ClipPrediction& p : predictions) {
    if (!by_id.contains(p.id)) {
      throw std::invalid_argument("prediction for unknown clip " + p.id);
    }
    if (!seen.insert(p.id).second) {
      throw std::invalid_argument("duplicate prediction clip " + p.id);
    }
  }
  if (seen.size() != by_id.size()) {
    throw std::invalid_argument("predictions do not cover every clip");
  }

  EvalReport r;
  LevelScore* levels[3] = {&r.grounding, &r.coref, &r.word};
  for (const ClipPrediction& cp : predictions) {
    const ClipGroundTruth& gt = *by_id.at(cp.id);
    for (const GroundingPrediction& pred : cp.predictions) {
      int best = 0;
      for (const GroundTruthSlot& slot : gt.slots) {
        best = std::max(best, Accepts(slot, pred));
      }
      for (int l = 0; l < 3; ++l) {
        ++levels[l]->predictions;
        levels[l]->correct_predictions += best > l;
      }
    }
    for (const GroundTruthSlot& slot : gt.slots) {
      int best = 0;
      for (const GroundingPrediction& pred : cp.predictions) {
        best = std::max(best, Accepts(slot, pred));
      }
      for (int l = 0; l < 3; ++l) {
        ++levels[l]->slots;
        levels[l]->covered_slots += best > l;
      }
    }
  }
  for (LevelScore* s : levels) Finish(*s);
  if (r.grounding.f1 < r.coref.f1 || r.coref.f1 < r.word.f1) {
    throw std::logic_error("F1 levels are not monotone");
  }
  return r;
}

double ConsistencyRate(std::span<const ClipPrediction> predictions) {
  int total = 0, consistent = 0;
  for (const ClipPrediction& cp : predictions) {
    for (const GroundingPrediction& p : cp.predictions) {
      ++total;
      consistent += (p.p == 0) == IsNameToken(p.word);
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(consistent) / total;
}

int CountPredictions(std::span<const ClipPrediction> predictions) {
  int n = 0;
  for (const ClipPrediction& cp : predictions) {
    n += static_cast<int>(cp.predictions.size());
  }
  return n;
}

std::string BaselineName(Baseline b) {
  switch (b) {
    case Baseline::kCenter:
      return "Center";
    case Baseline::kLxA:
      return "LxA";
    case Baseline::kLxASim:
      return "LxA+Sim";
  }
  return "?";
}

ClipPrediction RunBaseline(Baseline strategy, const Clip& clip,
                           const Clip* previous, const ClipGroundTruth& truth,
                           int p_max) {
  ClipPrediction out;
  out.id = clip.id;
  if (clip.tracks.empty()) return out;
  const Track* chosen = nullptr;
  if (strategy == Baseline::kCenter) {
    const double fx = 0.5 * clip.frame_size[0];
    const double fy = 0.5 * clip.frame_size[1];
    double best = 0.0;
    for (const Track& t : clip.tracks) {
      const double d = std::hypot(t.MeanCenterX() - fx, t.MeanCenterY() - fy);
      if (chosen == nullptr || d < best) {
        chosen = &t;
        best = d;
      }
    }
  } else {
    chosen = clip.FindTrack(LargestTracks(clip, 1).front());
  }
  int p = 0;
  if (strategy == Baseline::kLxASim && previous != nullptr) {
    double best = 0.0;
    for (int id : LargestTracks(*previous, p_max)) {
      const Track* t = previous->FindTrack(id);
      const double sim = CosineSimilarity(chosen->v_head, t->v_head);
      if (p == 0 || sim > best) {
        p = id;
        best = sim;
      }
    }
  }
  for (const GroundTruthSlot& slot : truth.slots) {
    GroundingPrediction pred;
    pred.tau = slot.tau;
    const Gender g = slot.word.rfind("Female", 0) == 0 ? Gender::kFemale
                                                         : Gender::kMale;
    pred.word = PersonToken(g, p != 0);
    pred.c = chosen->id;
    pred.p = p;
    out.predictions.push_back(pred);
  }
  return out;
}

std::vector<ClipPrediction> RunBaselineOnCorpus(
    Baseline strategy, const Corpus& corpus,
    std::span<const ClipGroundTruth> truth) {
  std::vector<ClipPrediction> out;
  for (const ClipGroundTruth& gt : truth) {
    const Clip* clip = corpus.Find(gt.id);
    if (clip == nullptr) {
      throw std::invalid_argument("ground truth names unknown clip " + gt.id);
    }
    out.push_back(RunBaseline(strategy, *clip, corpus.Previous(*clip), gt));
  }
  return out;
}

RecallMetrics ComputeRecall(std::span<const Detection> detections,
                            std::span<const Track> tracks,
                            std::span<const Annotation> annotations) {
  RecallMetrics r;
  for (const Annotation& a : annotations) {
    ++r.annotations;
    bool det = false;
    for (const Detection& d : detections) {
      if (d.frame == a.frame && PassesDetectionFilter(d) && Iou(d.box, a.box) >= 0.5) {
        det = true;
        break;
      }
    }
    bool trk = false;
    for (const Track& t : tracks) {
      for (const Detection& d : t.detections) {
        if (d.frame == a.frame && Iou(d.box, a.box) >= 0.5) {
          trk = true;
          break;
        }
      }
      if (trk) break;
    }
    r.detection_hits += det;
    r.track_hits += trk;
  }
  if (r.annotations > 0) {
    r.detection_recall = static_cast<double>(r.detection_hits) / r.annotations;
    r.track_recall = static_cast<double>(r.track_hits) / r.annotations;
  }
  return r;
}

RecallMetrics CombineRecall(std::span<const RecallMetrics> parts) {
  RecallMetrics r;
  for (const RecallMetrics& p : parts) {
    r.annotations += p.annotations;
    r.detection_hits += p.detection_hits;
    r.track_hits += p.track_hits;
  }
  if (r.annotations > 0) {
    r.detection_recall = static_cast<double>(r.detection_hits) / r.annotations;
    r.track_recall = static_cast<double>(r.track_hits) / r.annotations;
  }
  return r;
}

std::string ClipPredictionToJsonLine(const ClipPrediction& p) {
  Json preds = Json::array();
  for (const GroundingPrediction& g : p.predictions) {
    preds.push_back({{"tau", g.tau}, {"word", g.word}, {"c", g.c}, {"p", g.p}});
  }
  return Json{{"id", p.id}, {"sentence", p.sentence}, {"predictions", preds}}
      .dump();
}

std::vector<ClipPrediction> ReadPredictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<ClipPrediction> out;
  internal::ForEachJsonLine(in, [&](const Json& j, int line) {
    FieldReader r(line, "");
    ClipPrediction p;
    p.id = r.String(r.Require(j, "id"), "id");
    const Json& sentence = r.Array(r.Require(j, "sentence"), "sentence");
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      p.sentence.push_back(
          r.String(sentence[i], "sentence[" + std::to_string(i) + "]"));
    }
    const Json& preds = r.Array(r.Require(j, "predictions"), "predictions");
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const FieldReader pr = r.Nested("predictions[" + std::to_string(i) + "]");
      GroundingPrediction g;
      g.tau = static_cast<int>(pr.Integer(pr.Require(preds[i], "tau"), "tau"));
      g.word = pr.String(pr.Require(preds[i], "word"), "word");
      if (!IsPersonToken(g.word)) pr.Fail("word", "not a person token");
      g.c = static_cast<int>(pr.Integer(pr.Require(preds[i], "c"), "c"));
      g.p = static_cast<int>(pr.Integer(pr.Require(preds[i], "p"), "p"));
      if (g.c <= 0) pr.Fail("c", "must be a positive track id");
      if (g.p < 0) pr.Fail("p", "must be >= 0");
      p.predictions.push_back(g);
    }
    out.push_back(std::move(p));
  });
  return out;
}

void WritePredictions(std::span<const ClipPrediction> predictions,
                      const std::filesystem::path& path,
                      const std::optional<ArtifactStamp>& stamp) {
  std::string text;
  if (stamp) text += MetaLine(*stamp) + "\n";
  for (const ClipPrediction& p : predictions) {
    text += ClipPredictionToJsonLine(p) + "\n";
  }
  internal::WriteFile(path, text);
}

std::string ClipGroundTruthToJsonLine(const ClipGroundTruth& gt) {
  Json slots = Json::array();
  for (const GroundTruthSlot& s : gt.slots) {
    slots.push_back({{"tau", s.tau},
                     {"word", s.word},
                     {"tracks", s.tracks},
                     {"prev", s.prev}});
  }
  return Json{{"id", gt.id}, {"slots", slots}}.dump();
}

std::vector<ClipGroundTruth> ReadGroundTruth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<ClipGroundTruth> out;
  internal::ForEachJsonLine(in, [&](const Json& j, int line) {
    FieldReader r(line, "");
    ClipGroundTruth gt;
    gt.id = r.String(r.Require(j, "id"), "id");
    const Json& slots = r.Array(r.Require(j, "slots"), "slots");
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const FieldReader sr = r.Nested("slots[" + std::to_string(i) + "]");
      GroundTruthSlot s;
      s.tau = static_cast<int>(sr.Integer(sr.Require(slots[i], "tau"), "tau"));
      s.word = sr.String(sr.Require(slots[i], "word"), "word");
      if (!IsPersonToken(s.word)) sr.Fail("word", "not a person token");
      s.tracks = sr.Integers(sr.Require(slots[i], "tracks"), "tracks");
      s.prev = sr.Integers(sr.Require(slots[i], "prev"), "prev");
      gt.slots.push_back(std::move(s));
    }
    out.push_back(std::move(gt));
  });
  return out;
}

void WriteGroundTruth(std::span<const ClipGroundTruth> truth,
                      const std::filesystem::path& path,
                      const std::optional<ArtifactStamp>& stamp) {
  std::string text;
  if (stamp) text += MetaLine(*stamp) + "\n";
  for (const ClipGroundTruth& gt : truth) {
    text += ClipGroundTruthToJsonLine(gt) + "\n";
  }
  internal::WriteFile(path, text);
}

namespace {

Json LevelJson(const LevelScore& s) {
  return {{"precision", s.precision},
          {"recall", s.recall},
          {"f1", s.f1},
          {"correct_predictions", s.correct_predictions},
          {"predictions", s.predictions},
          {"covered_slots", s.covered_slots},
          {"slots", s.slots}};
}

Json ReportJson(const EvalReport& r) {
  return {{"grounding", LevelJson(r.grounding)},
          {"grounding_coref", LevelJson(r.coref)},
          {"grounding_coref_word", LevelJson(r.word)}};
}

}  // namespace

std::string RunReportToJson(const RunReport& report) {
  Json j;
  j["model"] = ReportJson(report.model);
  j["consistency_rate"] = report.consistency;
  j["support"] = {{"clips", report.clips},
                  {"person_predictions", report.person_predictions},
                  {"slots", report.model.grounding.slots}};
  Json baselines = Json::object();
  for (const auto& [name, r] : report.baselines) baselines[name] = ReportJson(r);
  j["baselines"] = baselines;
  if (report.recall) {
    j["recall"] = {{"detection", report.recall->detection_recall},
                   {"track", report.recall->track_recall},
                   {"annotations", report.recall->annotations}};
  }
  if (report.linking_accuracy) j["linking_accuracy"] = *report.linking_accuracy;
  if (report.stamp) j["_meta"] = internal::StampJson(*report.stamp);
  return j.dump(2) + "\n";
}

}  // namespace grounded
