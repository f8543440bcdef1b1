#include "grounded/activations.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace grounded {

Vec Softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of empty vector");
  for (double v : logits) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("softmax input is not finite");
    }
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

Vec MaskedSoftmax(std::span<const double> logits,
                  std::span<const std::uint8_t> mask) {
  if (logits.size() != mask.size()) {
    throw std::invalid_argument("masked softmax: mask size mismatch");
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    if (!std::isfinite(logits[i])) {
      throw std::invalid_argument("softmax input is not finite");
    }
    mx = std::max(mx, logits[i]);
  }
  if (!std::isfinite(mx)) {
    throw std::invalid_argument("masked softmax: every cell is masked");
  }
  Vec out(logits.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double Htan(double x) { return std::tanh(x); }

Vec Htan(std::span<const double> x) {
  Vec out(x.size());
  std::transform(x.begin(), x.end(), out.begin(),
                 [](double v) { return std::tanh(v); });
  return out;
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double LogSumExp(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("logsumexp of empty vector");
  const double mx = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

std::size_t ArgMax(std::span<const double> x) {
  return static_cast<std::size_t>(
      std::max_element(x.begin(), x.end()) - x.begin());
}

}  // namespace grounded
