#include "grounded/tracker.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "grounded/activations.h"
#include "grounded/track_repr.h"
#include "json_util.h"

namespace grounded {

using internal::Json;

PairwiseFeatureVec PairwiseFeature(const Box& a, const Box& b) {
  const double mean_h = 0.5 * (a.h + b.h);
  const double dx = std::abs(a.cx() - b.cx()) / mean_h;
  const double dy = std::abs(a.cy() - b.cy()) / mean_h;
  const double dh = std::abs(a.h - b.h) / mean_h;
  const double iou = Iou(a, b);
  return {dx, dy, dh, iou, dx * dx, dy * dy, dh * dh, iou * iou};
}

double PairwiseModel::LogOdds(const PairwiseFeatureVec& feature) const {
  double z = bias;
  for (int k = 0; k < kPairwiseDim; ++k) z += weights[k] * feature[k];
  return z;
}

double PairwiseModel::Probability(const PairwiseFeatureVec& feature) const {
  return Sigmoid(LogOdds(feature));
}

bool PairwiseModel::AllFinite() const {
  return std::isfinite(bias) &&
         std::all_of(weights.begin(), weights.end(),
                     [](double w) { return std::isfinite(w); });
}

PairwiseModel FitPairwiseModel(std::span<const LabeledPair> pairs,
                               const PairwiseFitOptions& options) {
  const auto positives = std::count_if(
      pairs.begin(), pairs.end(), [](const LabeledPair& p) { return p.same; });
  if (positives == 0 || positives == static_cast<long>(pairs.size())) {
    throw DegenerateFitError(
        "pairwise training data needs both same and different pairs");
  }
  const double n = static_cast<double>(pairs.size());
  PairwiseFeatureVec mean{}, stddev{};
  for (const LabeledPair& p : pairs) {
    for (int k = 0; k < kPairwiseDim; ++k) mean[k] += p.feature[k] / n;
  }
  for (const LabeledPair& p : pairs) {
    for (int k = 0; k < kPairwiseDim; ++k) {
      stddev[k] += (p.feature[k] - mean[k]) * (p.feature[k] - mean[k]) / n;
    }
  }
  for (double& s : stddev) s = std::sqrt(s) < kStdFloor ? 1.0 : std::sqrt(s);

  std::vector<PairwiseFeatureVec> z(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (int k = 0; k < kPairwiseDim; ++k) {
      z[i][k] = (pairs[i].feature[k] - mean[k]) / stddev[k];
    }
  }
  PairwiseModel m;
  for (int it = 0; it < options.iterations; ++it) {
    PairwiseFeatureVec gw{};
    double gb = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double r = m.Probability(z[i]) - (pairs[i].same ? 1.0 : 0.0);
      for (int k = 0; k < kPairwiseDim; ++k) gw[k] += r * z[i][k] / n;
      gb += r / n;
    }
    for (int k = 0; k < kPairwiseDim; ++k) {
      m.weights[k] -= options.learning_rate * (gw[k] + options.l2 * m.weights[k]);
    }
    m.bias -= options.learning_rate * gb;
  }
  PairwiseModel raw;
  raw.bias = m.bias;
  for (int k = 0; k < kPairwiseDim; ++k) {
    raw.weights[k] = m.weights[k] / stddev[k];
    raw.bias -= m.weights[k] * mean[k] / stddev[k];
  }
  return raw;
}

double PairwiseAccuracy(const PairwiseModel& model,
                        std::span<const LabeledPair> pairs) {
  if (pairs.empty()) return 0.0;
  int correct = 0;
  for (const LabeledPair& p : pairs) {
    correct += (model.LogOdds(p.feature) > 0.0) == p.same;
  }
  return static_cast<double>(correct) / pairs.size();
}

std::string PairwiseModelToJson(const PairwiseModel& model) {
  Json j = {{"weights", model.weights}, {"bias", model.bias}};
  return j.dump();
}

PairwiseModel PairwiseModelFromJson(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(1, "", std::string("malformed JSON: ") + e.what());
  }
  internal::FieldReader r(1, "");
  const std::vector<double> w = r.Numbers(r.Require(j, "weights"), "weights");
  if (w.size() != kPairwiseDim) r.Fail("weights", "expected 8 weights");
  PairwiseModel m;
  std::copy(w.begin(), w.end(), m.weights.begin());
  m.bias = r.Number(r.Require(j, "bias"), "bias");
  return m;
}

int ShotOf(int frame, std::span<const int> boundaries) {
  int shot = 0;
  for (int b : boundaries) shot += b < frame;
  return shot;
}

namespace {

// Filtered detection indices grouped by frame.
std::map<int, std::vector<int>> ByFrame(
    std::span<const RawDetection> detections) {
  std::map<int, std::vector<int>> out;
  for (int i = 0; i < static_cast<int>(detections.size()); ++i) {
    if (PassesDetectionFilter(detections[i].det)) {
      out[detections[i].det.frame].push_back(i);
    }
  }
  return out;
}

template <typename Fn>
void ForEachConsecutivePair(std::span<const RawDetection> detections,
                            std::span<const int> boundaries, Fn&& fn) {
  const auto frames = ByFrame(detections);
  for (const auto& [t, here] : frames) {
    auto next = frames.find(t + 1);
    if (next == frames.end()) continue;
    if (ShotOf(t, boundaries) != ShotOf(t + 1, boundaries)) continue;
    for (int i : here) {
      for (int j : next->second) fn(i, j);
    }
  }
}

Vec MeanOf(std::span<const RawDetection> detections,
           std::span<const int> members, Vec RawDetection::*field) {
  Vec mean((detections[members[0]].*field).size(), 0.0);
  for (int i : members) Axpy(1.0, detections[i].*field, mean);
  for (double& v : mean) v /= members.size();
  return mean;
}

}  // namespace

std::vector<LabeledPair> TrainingPairs(std::span<const RawDetection> detections,
                                       std::span<const int> boundaries) {
  std::vector<LabeledPair> pairs;
  ForEachConsecutivePair(detections, boundaries, [&](int i, int j) {
    const RawDetection& a = detections[i];
    const RawDetection& b = detections[j];
    pairs.push_back({PairwiseFeature(a.det.box, b.det.box),
                     a.label > 0 && a.label == b.label});
  });
  return pairs;
}

TrackingResult BuildTracks(std::span<const RawDetection> detections,
                           std::span<const int> boundaries,
                           const PairwiseModel& model,
                           const TrackerOptions& options) {
  std::vector<int> nodes;
  std::vector<int> node_of(detections.size(), -1);
  for (int i = 0; i < static_cast<int>(detections.size()); ++i) {
    if (PassesDetectionFilter(detections[i].det)) {
      node_of[i] = static_cast<int>(nodes.size());
      nodes.push_back(i);
    }
  }
  TrackingResult result;
  if (nodes.empty()) return result;

  // Level 1.
  std::vector<WeightedEdge> edges;
  ForEachConsecutivePair(detections, boundaries, [&](int i, int j) {
    edges.push_back({node_of[i], node_of[j],
                     model.LogOdds(PairwiseFeature(detections[i].det.box,
                                                   detections[j].det.box))});
  });
  const Partition level1 =
      SolveMulticut(static_cast<int>(nodes.size()), edges, options.multicut);
  std::vector<std::vector<int>> tracklets(level1.num_clusters());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    tracklets[level1.labels[k]].push_back(nodes[k]);
  }
  std::erase_if(tracklets, [&](const std::vector<int>& members) {
    std::set<int> frames;
    for (int i : members) frames.insert(detections[i].det.frame);
    return static_cast<int>(frames.size()) < options.min_length;
  });
  if (tracklets.empty()) return result;

  // Level 2.
  std::vector<Vec> heads;
  for (const auto& members : tracklets) {
    heads.push_back(MeanOf(detections, members, &RawDetection::v_head));
  }
  std::vector<WeightedEdge> affinity;
  const int n = static_cast<int>(tracklets.size());
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      affinity.push_back(
          {a, b, CosineSimilarity(heads[a], heads[b]) - options.beta});
    }
  }
  const Partition level2 = SolveMulticut(n, affinity, options.multicut);
  std::vector<std::vector<int>> groups(level2.num_clusters());
  for (int a = 0; a < n; ++a) {
    auto& g = groups[level2.labels[a]];
    g.insert(g.end(), tracklets[a].begin(), tracklets[a].end());
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end());

  for (const auto& members : groups) {
    Track track;
    track.id = static_cast<int>(result.tracks.size()) + 1;
    for (int i : members) track.detections.push_back(detections[i].det);
    track.v_head = MeanOf(detections, members, &RawDetection::v_head);
    track.v_body = MeanOf(detections, members, &RawDetection::v_body);
    track.v_stat = TrackStats(track.detections);
    result.tracks.push_back(std::move(track));
    result.members.push_back(members);
  }
  return result;
}

}  // namespace grounded
