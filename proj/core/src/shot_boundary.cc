#include "grounded/shot_boundary.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace grounded {
namespace {

std::vector<double> Gray(const Frame& f) {
  std::vector<double> g(static_cast<std::size_t>(f.width) * f.height);
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      g[y * f.width + x] =
          (f.at(x, y, 0) + f.at(x, y, 1) + f.at(x, y, 2)) / 3.0;
    }
  }
  return g;
}

std::vector<CornerPoint> MinEigenCorners(const Frame& f,
                                         const ShotOptions& options) {
  const int w = f.width, h = f.height;
  const auto g = Gray(f);
  auto px = [&](int x, int y) { return g[y * w + x]; };
  std::vector<double> ixx(w * h, 0.0), iyy(w * h, 0.0), ixy(w * h, 0.0);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      // Sobel.
      const double gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      ixx[y * w + x] = gx * gx / 64.0;
      iyy[y * w + x] = gy * gy / 64.0;
      ixy[y * w + x] = gx * gy / 64.0;
    }
  }
  std::vector<double> response(w * h, 0.0);
  double max_response = 0.0;
  for (int y = 2; y + 2 < h; ++y) {
    for (int x = 2; x + 2 < w; ++x) {
      double a = 0, b = 0, c = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int k = (y + dy) * w + (x + dx);
          a += ixx[k];
          b += ixy[k];
          c += iyy[k];
        }
      }
      const double half_diff = 0.5 * (a - c);
      const double lmin = 0.5 * (a + c) - std::sqrt(half_diff * half_diff + b * b);
      response[y * w + x] = lmin;
      max_response = std::max(max_response, lmin);
    }
  }
  std::vector<CornerPoint> corners;
  // Gray levels are integers / 3, so any real texture gives a response well
  // above this floor; flat frames give exactly zero.
  constexpr double kAbsoluteFloor = 1e-3;
  if (max_response <= kAbsoluteFloor) return corners;
  const double floor = std::max(kAbsoluteFloor,
                                options.corner_quality * max_response);
  const int margin = std::max(2, options.patch_size / 2);
  for (int y = margin; y + margin < h; ++y) {
    for (int x = margin; x + margin < w; ++x) {
      const double r = response[y * w + x];
      if (r < floor) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx || dy) && response[(y + dy) * w + (x + dx)] > r) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) corners.push_back({x, y, r});
    }
  }
  std::stable_sort(corners.begin(), corners.end(),
                   [](const CornerPoint& a, const CornerPoint& b) {
                     return a.response > b.response;
                   });
  if (static_cast<int>(corners.size()) > options.max_corners) {
    corners.resize(options.max_corners);
  }
  return corners;
}

}  // namespace

FrameSignature ComputeFrameSignature(const Frame& frame,
                                     const ShotOptions& options) {
  if (frame.width <= 0 || frame.height <= 0 ||
      frame.rgb.size() != static_cast<std::size_t>(3 * frame.width * frame.height)) {
    throw std::invalid_argument("frame is empty or malformed");
  }
  if (options.bins < 2) throw std::invalid_argument("need at least 2 bins");
  FrameSignature sig;
  sig.histogram.assign(3 * options.bins, 0.0);
  const double total = 3.0 * frame.width * frame.height;
  for (std::size_t i = 0; i < frame.rgb.size(); ++i) {
    const int ch = static_cast<int>(i % 3);
    const int bin = frame.rgb[i] * options.bins / 256;
    sig.histogram[ch * options.bins + bin] += 1.0;
  }
  for (double& v : sig.histogram) v /= total;
  sig.corners = MinEigenCorners(frame, options);
  return sig;
}

double HistogramDistance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("histogram sizes differ");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

double SurvivalRatio(const Frame& first, const FrameSignature& first_signature,
                     const Frame& second, const ShotOptions& options) {
  if (first_signature.corners.empty()) return 1.0;
  if (first.width != second.width || first.height != second.height) return 0.0;
  const int w = first.width, h = first.height;
  const auto g1 = Gray(first);
  const auto g2 = Gray(second);
  const int half = options.patch_size / 2;
  const double npix = static_cast<double>(options.patch_size * options.patch_size);
  const double limit = options.ssd_threshold * npix;
  int survived = 0;
  for (const CornerPoint& c : first_signature.corners) {
    if (c.x - half < 0 || c.y - half < 0 || c.x + half >= w || c.y + half >= h) {
      continue;
    }
    bool found = false;
    for (int dy = -options.search_radius; dy <= options.search_radius && !found;
         ++dy) {
      const int ty = c.y + dy;
      if (ty - half < 0 || ty + half >= h) continue;
      for (int dx = -options.search_radius; dx <= options.search_radius; ++dx) {
        const int tx = c.x + dx;
        if (tx - half < 0 || tx + half >= w) continue;
        double ssd = 0.0;
        for (int py = -half; py <= half && ssd < limit; ++py) {
          const double* a = &g1[(c.y + py) * w + c.x - half];
          const double* b = &g2[(ty + py) * w + tx - half];
          for (int px = 0; px < options.patch_size; ++px) {
            const double d = a[px] - b[px];
            ssd += d * d;
          }
        }
        if (ssd < limit) {
          found = true;
          break;
        }
      }
    }
    if (found) ++survived;
  }
  return static_cast<double>(survived) /
         static_cast<double>(first_signature.corners.size());
}

std::vector<TransitionCues> ComputeTransitionCues(std::span<const Frame> frames,
                                                  const ShotOptions& options) {
  std::vector<TransitionCues> cues;
  if (frames.size() < 2) return cues;
  std::vector<FrameSignature> sigs;
  sigs.reserve(frames.size());
  for (const Frame& f : frames) sigs.push_back(ComputeFrameSignature(f, options));
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    cues.push_back({HistogramDistance(sigs[i].histogram, sigs[i + 1].histogram),
                    SurvivalRatio(frames[i], sigs[i], frames[i + 1], options)});
  }
  return cues;
}

std::vector<int> DetectBoundaries(std::span<const TransitionCues> cues,
                                  double theta_hist, double theta_survive) {
  if (theta_hist < 0.0 || theta_survive < 0.0 || theta_survive > 1.0) {
    throw std::invalid_argument("shot thresholds out of range");
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < cues.size(); ++i) {
    if (cues[i].hist_distance > theta_hist || cues[i].survival < theta_survive) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

std::vector<int> DetectBoundaries(std::span<const Frame> frames,
                                  double theta_hist, double theta_survive,
                                  const ShotOptions& options) {
  const auto cues = ComputeTransitionCues(frames, options);
  return DetectBoundaries(cues, theta_hist, theta_survive);
}

PrfScore BoundaryScore(std::span<const int> predicted,
                       std::span<const int> truth) {
  const std::set<int> p(predicted.begin(), predicted.end());
  const std::set<int> t(truth.begin(), truth.end());
  int hit = 0;
  for (int x : p) hit += t.contains(x) ? 1 : 0;
  PrfScore s;
  s.precision = p.empty() ? (t.empty() ? 1.0 : 0.0) : double(hit) / p.size();
  s.recall = t.empty() ? 1.0 : double(hit) / t.size();
  const double denom = s.precision + s.recall;
  s.f1 = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
  return s;
}

namespace {

// Midpoints between neighbouring distinct cue values whose labels differ.
// Moving a threshold across a run of equally labeled values changes the
// F-score monotonically, so only these positions can be optimal.
std::vector<double> CandidateCuts(std::span<const double> values,
                                  std::span<const std::uint8_t> labels,
                                  double low, double high) {
  std::vector<std::pair<double, int>> sorted;  // value, label mask
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int bit = labels[i] ? 2 : 1;
    if (!sorted.empty() && sorted.back().first == values[i]) {
      sorted.back().second |= bit;
    } else {
      sorted.push_back({values[i], bit});
    }
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, int>> merged;
  for (const auto& [v, mask] : sorted) {
    if (!merged.empty() && merged.back().first == v) {
      merged.back().second |= mask;
    } else {
      merged.push_back({v, mask});
    }
  }
  std::vector<double> mids;
  for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
    if (merged[i].second != merged[i + 1].second || merged[i].second == 3) {
      mids.push_back(0.5 * (merged[i].first + merged[i + 1].first));
    }
  }
  constexpr std::size_t kMaxCandidates = 512;
  std::vector<double> out = {low, high};
  if (mids.size() <= kMaxCandidates) {
    out.insert(out.end(), mids.begin(), mids.end());
  } else {
    for (std::size_t k = 0; k < kMaxCandidates; ++k) {
      out.push_back(mids[k * (mids.size() - 1) / (kMaxCandidates - 1)]);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

ShotThresholds FitShotThresholds(std::span<const TransitionCues> cues,
                                 std::span<const std::uint8_t> is_boundary) {
  if (cues.size() != is_boundary.size() || cues.empty()) {
    throw std::invalid_argument("need one label per transition");
  }
  std::vector<double> hist, surv;
  double max_hist = 0.0;
  for (const TransitionCues& c : cues) {
    hist.push_back(c.hist_distance);
    surv.push_back(c.survival);
    max_hist = std::max(max_hist, c.hist_distance);
  }
  // The extreme candidates disable one cue entirely.
  const auto hist_cands =
      CandidateCuts(hist, is_boundary, 0.0, max_hist + 1.0);
  const auto surv_cands = CandidateCuts(surv, is_boundary, 0.0, 1.0);
  ShotThresholds best{max_hist + 1.0, 0.0, -1.0};
  for (double th : hist_cands) {
    for (double ts : surv_cands) {
      int tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < cues.size(); ++i) {
        const bool pred = cues[i].hist_distance > th || cues[i].survival < ts;
        if (pred && is_boundary[i]) ++tp;
        else if (pred) ++fp;
        else if (is_boundary[i]) ++fn;
      }
      const double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
      if (f1 > best.f1) best = {th, ts, f1};
    }
  }
  return best;
}

}  // namespace grounded
