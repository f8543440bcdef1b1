#ifndef GROUNDED_OPTIMIZER_H_
#define GROUNDED_OPTIMIZER_H_

#include <span>
#include <string>
#include <vector>

#include "grounded/params.h"

namespace grounded {

enum class OptimizerKind { kSgd, kAdam };

OptimizerKind ParseOptimizerKind(const std::string& name);

struct OptimizerOptions {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Global L2 gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 5.0;
};

class Optimizer {
 public:
  explicit Optimizer(const OptimizerOptions& options) : options_(options) {}

  // Applies one update from the gradients bound to `params`.
  void Step(std::span<const ParamTensor> params);

  const OptimizerOptions& options() const { return options_; }

 private:
  OptimizerOptions options_;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
  long steps_ = 0;
};

}  // namespace grounded

#endif  // GROUNDED_OPTIMIZER_H_
