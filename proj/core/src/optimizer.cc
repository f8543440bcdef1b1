#include "grounded/optimizer.h"

#include <cmath>
#include <stdexcept>

namespace grounded {

OptimizerKind ParseOptimizerKind(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

void Optimizer::Step(std::span<const ParamTensor> params) {
  double scale = 1.0;
  if (options_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const ParamTensor& p : params) sq += SquaredNorm(p.grad->values());
    const double norm = std::sqrt(sq);
    if (norm > options_.clip_norm) scale = options_.clip_norm / norm;
  }
  ++steps_;
  if (options_.kind == OptimizerKind::kSgd) {
    for (const ParamTensor& p : params) {
      Axpy(-options_.learning_rate * scale, p.grad->values(),
           p.value->values());
    }
    return;
  }
  if (first_moment_.empty()) {
    for (const ParamTensor& p : params) {
      first_moment_.emplace_back(p.value->rows(), p.value->cols());
      second_moment_.emplace_back(p.value->rows(), p.value->cols());
    }
  }
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto w = params[t].value->values();
    auto g = params[t].grad->values();
    auto m = first_moment_[t].values();
    auto v = second_moment_[t].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * scale;
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      w[i] -= options_.learning_rate * (m[i] / c1) /
              (std::sqrt(v[i] / c2) + options_.epsilon);
    }
  }
}

}  // namespace grounded
