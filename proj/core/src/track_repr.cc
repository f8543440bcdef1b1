#include "grounded/track_repr.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace grounded {
namespace {

void MeanStd(std::span<const double> xs, double& mean, double& stddev) {
  const double n = static_cast<double>(xs.size());
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  stddev = std::sqrt(var / n);
}

nlohmann::json NormToJson(const FeatureNorm& n) {
  return {{"mean", n.mean}, {"std", n.stddev}};
}

FeatureNorm NormFromJson(const nlohmann::json& j, const char* block) {
  if (!j.contains(block)) {
    throw std::runtime_error(std::string("norm stats: missing block '") +
                             block + "'");
  }
  FeatureNorm n;
  n.mean = j.at(block).at("mean").get<Vec>();
  n.stddev = j.at(block).at("std").get<Vec>();
  if (n.mean.size() != n.stddev.size()) {
    throw std::runtime_error(std::string("norm stats: size mismatch in '") +
                             block + "'");
  }
  return n;
}

}  // namespace

Box BodyRegion(const Box& head,
               std::optional<std::array<double, 2>> frame_size) {
  Box body{head.cx() - 1.5 * head.w, head.y, 3.0 * head.w, 6.0 * head.h};
  if (!frame_size) return body;
  const double fw = (*frame_size)[0];
  const double fh = (*frame_size)[1];
  const double x0 = std::clamp(body.x, 0.0, fw - 1.0);
  const double y0 = std::clamp(body.y, 0.0, fh - 1.0);
  const double x1 = std::clamp(body.right(), x0 + 1.0, fw);
  const double y1 = std::clamp(body.bottom(), y0 + 1.0, fh);
  return Box{x0, y0, x1 - x0, y1 - y0};
}

Vec TrackStats(std::span<const Detection> detections) {
  if (detections.empty()) {
    throw std::invalid_argument("track statistics need at least one detection");
  }
  const std::size_t n = detections.size();
  Vec w(n), h(n), cx(n), cy(n), score(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = detections[i].box.w;
    h[i] = detections[i].box.h;
    cx[i] = detections[i].box.cx();
    cy[i] = detections[i].box.cy();
    score[i] = detections[i].score;
  }
  Vec out(kStatDim);
  out[0] = static_cast<double>(n);
  MeanStd(w, out[1], out[2]);
  MeanStd(h, out[3], out[4]);
  MeanStd(cx, out[5], out[6]);
  MeanStd(cy, out[7], out[8]);
  MeanStd(score, out[9], out[10]);
  return out;
}

void FeatureNorm::Apply(Vec& x) const {
  if (x.size() != mean.size()) {
    throw std::invalid_argument("feature dimension does not match norm stats");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = (x[i] - mean[i]) / stddev[i];
  }
}

FeatureNorm FitFeatureNorm(const std::vector<const Vec*>& samples) {
  if (samples.empty()) {
    throw std::invalid_argument("cannot fit normalization on zero samples");
  }
  const std::size_t d = samples.front()->size();
  FeatureNorm n{Vec(d, 0.0), Vec(d, 0.0)};
  for (const Vec* s : samples) {
    if (s->size() != d) throw std::invalid_argument("ragged feature vectors");
    Axpy(1.0, *s, n.mean);
  }
  const double count = static_cast<double>(samples.size());
  for (double& m : n.mean) m /= count;
  for (const Vec* s : samples) {
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = (*s)[i] - n.mean[i];
      n.stddev[i] += diff * diff;
    }
  }
  for (double& v : n.stddev) {
    v = std::sqrt(v / count);
    if (v < kStdFloor) v = 1.0;
  }
  return n;
}

void NormStats::Apply(Track& track) const {
  head.Apply(track.v_head);
  body.Apply(track.v_body);
  stat.Apply(track.v_stat);
}

NormStats NormalizeDataset(Corpus& corpus, const std::string& fit_split) {
  std::vector<const Vec*> heads, bodies, stats;
  for (const Clip& c : corpus.clips) {
    if (c.split != fit_split) continue;
    for (const Track& t : c.tracks) {
      heads.push_back(&t.v_head);
      bodies.push_back(&t.v_body);
      stats.push_back(&t.v_stat);
    }
  }
  if (heads.empty()) {
    throw std::invalid_argument("no tracks in split '" + fit_split + "'");
  }
  NormStats ns{FitFeatureNorm(heads), FitFeatureNorm(bodies),
               FitFeatureNorm(stats)};
  ApplyNormStats(ns, corpus);
  return ns;
}

void ApplyNormStats(const NormStats& stats, Corpus& corpus) {
  for (Clip& c : corpus.clips) {
    for (Track& t : c.tracks) stats.Apply(t);
  }
}

void ComputeTrackStats(Corpus& corpus) {
  for (Clip& c : corpus.clips) {
    for (Track& t : c.tracks) t.v_stat = TrackStats(t.detections);
  }
}

std::string NormStatsToJson(const NormStats& stats) {
  nlohmann::json j = {{"v_head", NormToJson(stats.head)},
                      {"v_body", NormToJson(stats.body)},
                      {"v_stat", NormToJson(stats.stat)}};
  return j.dump();
}

NormStats NormStatsFromJson(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  return NormStats{NormFromJson(j, "v_head"), NormFromJson(j, "v_body"),
                   NormFromJson(j, "v_stat")};
}

}  // namespace grounded
