#include "grounded/eval.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "grounded/synth.h"

namespace grounded {
namespace {

GroundTruthSlot Slot(int tau, std::string word, std::vector<int> tracks,
                     std::vector<int> prev = {}) {
  return {tau, std::move(word), std::move(tracks), std::move(prev)};
}

GroundingPrediction Pred(int tau, std::string word, int c, int p) {
  return {tau, std::move(word), c, p};
}

TEST(F1TriadTest, PerfectPredictionsScoreOne) {
  const std::vector<ClipGroundTruth> gt = {
      {"a", {Slot(0, "MaleName", {1}), Slot(2, "FemaleName", {2, 3})}},
      {"b", {Slot(0, "MaleCoref", {4}, {1})}}};
  const std::vector<ClipPrediction> pred = {
      {"a", {}, {Pred(0, "MaleName", 1, 0), Pred(2, "FemaleName", 3, 0)}},
      {"b", {}, {Pred(0, "MaleCoref", 4, 1)}}};
  const EvalReport r = F1Triad(pred, gt);
  for (const LevelScore* s : {&r.grounding, &r.coref, &r.word}) {
    EXPECT_EQ(s->precision, 1.0);
    EXPECT_EQ(s->recall, 1.0);
    EXPECT_EQ(s->f1, 1.0);
  }
}

TEST(F1TriadTest, NullPreviousOnCorefFixture) {
  const std::vector<ClipGroundTruth> gt = {
      {"b", {Slot(0, "MaleCoref", {4}, {1}), Slot(2, "FemaleCoref", {5}, {2})}}};
  const std::vector<ClipPrediction> pred = {
      {"b", {}, {Pred(0, "MaleCoref", 4, 0), Pred(2, "FemaleCoref", 5, 0)}}};
  const EvalReport r = F1Triad(pred, gt);
  EXPECT_EQ(r.grounding.f1, 1.0);
  EXPECT_EQ(r.coref.f1, 0.0);
  EXPECT_EQ(r.word.f1, 0.0);
}

TEST(F1TriadTest, PrecisionOneRecallThirdGivesHalf) {
  const std::vector<ClipGroundTruth> gt = {
      {"a", {Slot(0, "MaleName", {1}), Slot(2, "MaleName", {2}),
             Slot(4, "MaleName", {3})}}};
  const std::vector<ClipPrediction> pred = {{"a", {}, {Pred(0, "MaleName", 1, 0)}}};
  const EvalReport r = F1Triad(pred, gt);
  EXPECT_EQ(r.grounding.precision, 1.0);
  EXPECT_NEAR(r.grounding.recall, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.grounding.f1, 0.5, 1e-15);
}

TEST(F1TriadTest, WordLevelNeedsTheWord) {
  const std::vector<ClipGroundTruth> gt = {{"a", {Slot(0, "MaleName", {1})}}};
  const std::vector<ClipPrediction> pred = {{"a", {}, {Pred(0, "FemaleName", 1, 0)}}};
  const EvalReport r = F1Triad(pred, gt);
  EXPECT_EQ(r.coref.f1, 1.0);
  EXPECT_EQ(r.word.f1, 0.0);
}

TEST(F1TriadTest, NothingPredictedScoresZero) {
  const std::vector<ClipGroundTruth> gt = {{"a", {Slot(0, "MaleName", {1})}}};
  const std::vector<ClipPrediction> pred = {{"a", {}, {}}};
  const EvalReport r = F1Triad(pred, gt);
  EXPECT_EQ(r.grounding.precision, 0.0);
  EXPECT_EQ(r.grounding.recall, 0.0);
  EXPECT_EQ(r.grounding.f1, 0.0);
}

TEST(F1TriadTest, MisalignedClipsAreRejected) {
  const std::vector<ClipGroundTruth> gt = {{"a", {}}, {"b", {}}};
  EXPECT_THROW(F1Triad(std::vector<ClipPrediction>{{"a", {}, {}}}, gt),
               std::invalid_argument);
  EXPECT_THROW(F1Triad(std::vector<ClipPrediction>{{"a", {}, {}}, {"c", {}, {}}}, gt),
               std::invalid_argument);
}

TEST(F1TriadTest, SwappingSidesSwapsPrecisionAndRecall) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ClipGroundTruth> gt;
    std::vector<ClipPrediction> pred;
    for (int clip = 0; clip < 3; ++clip) {
      const std::string id = "c" + std::to_string(clip);
      ClipGroundTruth g{id, {}};
      ClipPrediction p{id, {}, {}};
      const int slots = rng.Index(3);
      for (int s = 0; s < slots; ++s) {
        const int prev = rng.Index(3);
        g.slots.push_back(Slot(s, rng.Bernoulli(0.5) ? "MaleName" : "MaleCoref",
                               {1 + static_cast<int>(rng.Index(3))},
                               prev == 0 ? std::vector<int>{} : std::vector<int>{prev}));
      }
      const int preds = rng.Index(3);
      for (int s = 0; s < preds; ++s) {
        p.predictions.push_back(Pred(s, rng.Bernoulli(0.5) ? "MaleName" : "MaleCoref",
                                     1 + rng.Index(3), rng.Index(3)));
      }
      gt.push_back(g);
      pred.push_back(p);
    }
    // Mirror: predictions become single-track slots and vice versa.
    std::vector<ClipGroundTruth> gt2;
    std::vector<ClipPrediction> pred2;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      ClipGroundTruth g{gt[i].id, {}};
      for (const GroundingPrediction& p : pred[i].predictions) {
        g.slots.push_back(Slot(p.tau, p.word, {p.c},
                               p.p == 0 ? std::vector<int>{} : std::vector<int>{p.p}));
      }
      ClipPrediction p{gt[i].id, {}, {}};
      for (const GroundTruthSlot& s : gt[i].slots) {
        p.predictions.push_back(Pred(s.tau, s.word, s.tracks[0],
                                     s.prev.empty() ? 0 : s.prev[0]));
      }
      gt2.push_back(g);
      pred2.push_back(p);
    }
    const EvalReport a = F1Triad(pred, gt);
    const EvalReport b = F1Triad(pred2, gt2);
    const std::pair<const LevelScore*, const LevelScore*> levels[] = {
        {&a.grounding, &b.grounding}, {&a.coref, &b.coref}, {&a.word, &b.word}};
    for (const auto& [x, y] : levels) {
      EXPECT_NEAR(x->precision, y->recall, 1e-12);
      EXPECT_NEAR(x->recall, y->precision, 1e-12);
      EXPECT_NEAR(x->f1, y->f1, 1e-12);
    }
    EXPECT_GE(a.grounding.f1, a.coref.f1);
    EXPECT_GE(a.coref.f1, a.word.f1);
  }
}

TEST(ConsistencyTest, HandCounts) {
  const std::vector<ClipPrediction> names = {
      {"a", {}, {Pred(0, "MaleName", 1, 0), Pred(1, "FemaleName", 2, 0)}}};
  EXPECT_EQ(ConsistencyRate(names), 1.0);
  const std::vector<ClipPrediction> corefs = {
      {"a", {}, {Pred(0, "MaleCoref", 1, 0), Pred(1, "FemaleCoref", 2, 0)}}};
  EXPECT_EQ(ConsistencyRate(corefs), 0.0);
  const std::vector<ClipPrediction> mixed = {
      {"a", {}, {Pred(0, "MaleCoref", 1, 3), Pred(1, "FemaleName", 2, 0)}},
      {"b", {}, {Pred(0, "MaleName", 1, 0), Pred(1, "FemaleName", 2, 4)}}};
  EXPECT_EQ(ConsistencyRate(mixed), 0.75);
  EXPECT_EQ(ConsistencyRate({}), 0.0);
}

Track BoxTrack(int id, double x, double y, double size, int frames) {
  Track t;
  t.id = id;
  for (int f = 0; f < frames; ++f) t.detections.push_back({f, {x, y, size, size}, 1.0});
  t.v_head = {1.0, 0.0};
  return t;
}

TEST(BaselineTest, SingleTrackIsAlwaysChosen) {
  Clip clip;
  clip.id = "a";
  clip.tracks = {BoxTrack(7, 10, 10, 20, 5)};
  const ClipGroundTruth gt{"a", {Slot(0, "FemaleName", {7})}};
  for (Baseline b : {Baseline::kCenter, Baseline::kLxA, Baseline::kLxASim}) {
    const ClipPrediction p = RunBaseline(b, clip, nullptr, gt);
    ASSERT_EQ(p.predictions.size(), 1u) << BaselineName(b);
    EXPECT_EQ(p.predictions[0].c, 7);
    EXPECT_EQ(p.predictions[0].p, 0);
    EXPECT_EQ(p.predictions[0].word, "FemaleName");
  }
}

TEST(BaselineTest, CenterAndLxAPickDifferentTracks) {
  Clip clip;
  clip.id = "a";
  clip.frame_size = {640, 360};
  clip.tracks = {BoxTrack(1, 310, 170, 20, 5), BoxTrack(2, 20, 20, 80, 30)};
  const ClipGroundTruth gt{"a", {Slot(0, "MaleName", {2})}};
  EXPECT_EQ(RunBaseline(Baseline::kCenter, clip, nullptr, gt).predictions[0].c, 1);
  EXPECT_EQ(RunBaseline(Baseline::kLxA, clip, nullptr, gt).predictions[0].c, 2);
}

TEST(BaselineTest, SimilarityPicksIdenticalPreviousTrack) {
  Clip prev;
  prev.id = "a";
  prev.tracks = {BoxTrack(1, 0, 0, 50, 20), BoxTrack(2, 0, 0, 40, 20)};
  prev.tracks[0].v_head = {0.0, 1.0};
  prev.tracks[1].v_head = {0.3, 0.1};
  Clip clip;
  clip.id = "b";
  clip.tracks = {BoxTrack(5, 0, 0, 50, 20)};
  clip.tracks[0].v_head = {0.3, 0.1};
  const ClipGroundTruth gt{"b", {Slot(0, "MaleCoref", {5}, {2})}};
  const ClipPrediction p = RunBaseline(Baseline::kLxASim, clip, &prev, gt);
  EXPECT_EQ(p.predictions[0].p, 2);
  EXPECT_EQ(p.predictions[0].word, "MaleCoref");
  EXPECT_EQ(RunBaseline(Baseline::kLxA, clip, &prev, gt).predictions[0].p, 0);
}

TEST(BaselineTest, NoTracksNoPredictions) {
  Clip clip;
  clip.id = "a";
  const ClipGroundTruth gt{"a", {Slot(0, "MaleName", {1})}};
  EXPECT_TRUE(RunBaseline(Baseline::kLxA, clip, nullptr, gt).predictions.empty());
}

// When the described character always owns the longest and largest track,
// LxA grounds every slot; an off-center character defeats Center.
TEST(BaselineTest, LargestDescribedCharacterFixture) {
  SynthConfig c;
  c.num_pairs = 40;
  c.two_person_prob = 0.0;
  c.off_center_single = true;
  c.render_raw = false;
  const Corpus corpus = GenerateCorpus(c, 9);
  const auto truth = BuildGroundTruth(corpus, "");
  EXPECT_EQ(F1Triad(RunBaselineOnCorpus(Baseline::kLxA, corpus, truth), truth)
                .grounding.f1,
            1.0);
  EXPECT_LT(F1Triad(RunBaselineOnCorpus(Baseline::kCenter, corpus, truth), truth)
                .grounding.f1,
            1.0);
}

TEST(RecallTest, IdentityEmptyAndHandCount) {
  const std::vector<Annotation> ann = {
      {0, {0, 0, 50, 50}, 1}, {1, {100, 100, 50, 50}, 1}, {2, {0, 0, 50, 50}, 2}};
  std::vector<Detection> dets;
  Track track;
  track.id = 1;
  for (const Annotation& a : ann) {
    dets.push_back({a.frame, a.box, 0.9});
    track.detections.push_back({a.frame, a.box, 0.9});
  }
  const std::vector<Track> tracks = {track};
  RecallMetrics r = ComputeRecall(dets, tracks, ann);
  EXPECT_EQ(r.detection_recall, 1.0);
  EXPECT_EQ(r.track_recall, 1.0);

  r = ComputeRecall({}, {}, ann);
  EXPECT_EQ(r.detection_recall, 0.0);
  EXPECT_EQ(r.track_recall, 0.0);

  // Third detection shifted off its annotation (IOU 0), second on the wrong
  // frame only for the track.
  dets[2].box.x = 200;
  Track partial = track;
  partial.detections[1].frame = 5;
  partial.detections[2].box.x = 200;
  const std::vector<Track> partial_tracks = {partial};
  r = ComputeRecall(dets, partial_tracks, ann);
  EXPECT_NEAR(r.detection_recall, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.track_recall, 1.0 / 3.0, 1e-15);

  // Undersized detections are ignored even when they overlap.
  std::vector<Detection> small = {{0, {0, 0, 30, 30}, 0.9}};
  const std::vector<Annotation> small_ann = {{0, {0, 0, 30, 30}, 1}};
  EXPECT_EQ(ComputeRecall(small, {}, small_ann).detection_recall, 0.0);

  const RecallMetrics parts[] = {r, ComputeRecall(dets, tracks, ann)};
  const RecallMetrics all = CombineRecall(parts);
  EXPECT_EQ(all.annotations, 6);
  EXPECT_NEAR(all.detection_recall, 4.0 / 6.0, 1e-15);
}

TEST(EvalIoTest, PredictionAndTruthRoundTrip) {
  const std::vector<ClipPrediction> pred = {
      {"a", {"MaleName", "runs"}, {Pred(0, "MaleName", 3, 0)}}, {"b", {}, {}}};
  const std::vector<ClipGroundTruth> gt = {
      {"a", {Slot(0, "MaleName", {3, 4})}}, {"b", {Slot(2, "FemaleCoref", {1}, {2})}}};
  const auto dir = std::filesystem::temp_directory_path();
  WritePredictions(pred, dir / "pred.jsonl", ArtifactStamp{"x", 1});
  WriteGroundTruth(gt, dir / "gt.jsonl");
  EXPECT_EQ(ReadPredictions(dir / "pred.jsonl"), pred);
  EXPECT_EQ(ReadGroundTruth(dir / "gt.jsonl"), gt);
  std::filesystem::remove(dir / "pred.jsonl");
  std::filesystem::remove(dir / "gt.jsonl");
}

TEST(EvalIoTest, BadPredictionNamesLineAndField) {
  const auto path = std::filesystem::temp_directory_path() / "bad_pred.jsonl";
  {
    std::ofstream out(path);
    out << R"({"id":"a","sentence":[],"predictions":[]})" << "\n"
        << R"({"id":"b","sentence":[],"predictions":[{"tau":0,"word":"runs","c":1,"p":0}]})"
        << "\n";
  }
  try {
    ReadPredictions(path);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.field(), "predictions[0].word");
  }
  std::filesystem::remove(path);
}

TEST(RunReportTest, JsonIsStable) {
  RunReport r;
  r.model.grounding.f1 = 0.5;
  r.baselines["LxA"] = {};
  const std::string a = RunReportToJson(r);
  EXPECT_EQ(a, RunReportToJson(r));
  EXPECT_NE(a.find("\"grounding_coref_word\""), std::string::npos);
  EXPECT_EQ(a.find("time"), std::string::npos);
}

}  // namespace
}  // namespace grounded
