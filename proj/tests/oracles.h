#ifndef GROUNDED_TESTS_ORACLES_H_
#define GROUNDED_TESTS_ORACLES_H_

// Independent reference computations used only by tests.

#include <functional>
#include <span>
#include <vector>

#include <cmath>
#include <limits>

#include "grounded/decoder.h"
#include "grounded/multicut.h"

namespace grounded::testing {

// Calls fn(labels) for every set partition of n nodes, as restricted growth
// strings (Bell(n) calls).
inline void ForEachSetPartition(int n,
                                const std::function<void(const std::vector<int>&)>& fn) {
  if (n == 0) {
    fn({});
    return;
  }
  std::vector<int> labels(n, 0), max_prefix(n, 0);
  while (true) {
    fn(labels);
    int i = n - 1;
    while (i > 0 && labels[i] == max_prefix[i - 1] + 1) --i;
    if (i == 0) return;
    ++labels[i];
    max_prefix[i] = std::max(max_prefix[i - 1], labels[i]);
    for (int j = i + 1; j < n; ++j) {
      labels[j] = 0;
      max_prefix[j] = max_prefix[i];
    }
  }
}

struct BruteForceResult {
  double best = 0.0;
  int optimal_count = 0;
  std::vector<int> labels;
};

inline BruteForceResult BruteForceMulticut(int n,
                                           std::span<const WeightedEdge> edges,
                                           double tie_tol = 1e-12) {
  BruteForceResult r;
  bool first = true;
  ForEachSetPartition(n, [&](const std::vector<int>& labels) {
    double obj = 0.0;
    for (const WeightedEdge& e : edges) {
      if (labels[e.u] == labels[e.v]) obj += e.cost;
    }
    if (first || obj > r.best + tie_tol) {
      r.best = obj;
      r.labels = labels;
      r.optimal_count = 1;
      first = false;
    } else if (obj >= r.best - tie_tol) {
      ++r.optimal_count;
    }
  });
  return r;
}

struct NaiveLoss {
  double word = 0.0;
  double attention = 0.0;
};

// Direct evaluation of the decoder forward pass, cell by cell, with no shared
// intermediate state; written independently of the production code.
inline NaiveLoss NaiveDecoderLoss(const DecoderParams& P, const DecoderDims& d,
                                  const DecoderExample& ex, double weight) {
  auto matvec = [](const Matrix& m, const std::vector<double>& x) {
    std::vector<double> y(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) y[r] += m(r, c) * x[c];
    }
    return y;
  };
  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const int C = static_cast<int>(ex.current.size());
  const int Pn = static_cast<int>(ex.previous.size());
  const int steps = static_cast<int>(ex.tokens.size()) + 1;
  std::vector<double> h(d.hidden, 0.0), cell(d.hidden, 0.0);
  NaiveLoss out;
  for (int s = 0; s < steps; ++s) {
    std::vector<double> vg(d.grounded(), 0.0);
    if (C > 0) {
      std::vector<double> logits, alpha;
      std::vector<std::vector<double>> feats;
      for (int p = 0; p <= Pn; ++p) {
        for (int c = 0; c < C; ++c) {
          const Track& tc = *ex.current[c];
          std::vector<double> vid(d.d_head, -1.0);
          if (p > 0) {
            for (int j = 0; j < d.d_head; ++j) {
              vid[j] = ex.previous[p - 1]->v_head[j] * tc.v_head[j];
            }
          }
          double logit = P.b_alpha(0, 0);
          for (int a = 0; a < d.attention; ++a) {
            double f = P.b_v(a, 0);
            for (int j = 0; j < d.d_head; ++j) f += P.w_head(a, j) * tc.v_head[j];
            for (int j = 0; j < d.d_body; ++j) f += P.w_body(a, j) * tc.v_body[j];
            for (int j = 0; j < d.d_stat; ++j) f += P.w_stat(a, j) * tc.v_stat[j];
            for (int j = 0; j < d.d_head; ++j) f += P.w_id(a, j) * vid[j];
            double gh = P.b_h(a, 0);
            for (int j = 0; j < d.hidden; ++j) gh += P.w_h(a, j) * h[j];
            logit += P.w_alpha(0, a) * std::tanh(gh) * std::tanh(f);
          }
          logits.push_back(logit);
          std::vector<double> feat = tc.v_head;
          feat.insert(feat.end(), tc.v_body.begin(), tc.v_body.end());
          feat.insert(feat.end(), tc.v_stat.begin(), tc.v_stat.end());
          feat.insert(feat.end(), vid.begin(), vid.end());
          feats.push_back(feat);
        }
      }
      double z = 0.0;
      for (double l : logits) z += std::exp(l);
      for (std::size_t k = 0; k < logits.size(); ++k) {
        const double a = std::exp(logits[k]) / z;
        alpha.push_back(a);
        for (std::size_t j = 0; j < vg.size(); ++j) vg[j] += a * feats[k][j];
      }
      for (const StepTarget& t : ex.targets) {
        if (t.step == s) out.attention -= weight * std::log(alpha[t.p * C + t.c]);
      }
    }
    std::vector<double> x = vg;
    x.insert(x.end(), ex.clip->v_global.begin(), ex.clip->v_global.end());
    const int in_word = s == 0 ? 0 : ex.tokens[s - 1];
    for (int j = 0; j < d.embedding; ++j) x.push_back(P.embedding(in_word, j));
    x.insert(x.end(), h.begin(), h.end());
    std::vector<double> z = matvec(P.lstm_w, x);
    const int H = d.hidden;
    for (int j = 0; j < H; ++j) {
      const double i = sigmoid(z[j] + P.lstm_b(j, 0));
      const double f = sigmoid(z[H + j] + P.lstm_b(H + j, 0));
      const double g = std::tanh(z[2 * H + j] + P.lstm_b(2 * H + j, 0));
      const double o = sigmoid(z[3 * H + j] + P.lstm_b(3 * H + j, 0));
      cell[j] = f * cell[j] + i * g;
      h[j] = o * std::tanh(cell[j]);
    }
    std::vector<double> w = matvec(P.w_pred, h);
    double zw = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) zw += std::exp(w[k] + P.b_pred(k, 0));
    const int target = s < static_cast<int>(ex.tokens.size()) ? ex.tokens[s] : 1;
    out.word -= w[target] + P.b_pred(target, 0) - std::log(zw);
  }
  return out;
}

}  // namespace grounded::testing

#endif  // GROUNDED_TESTS_ORACLES_H_
