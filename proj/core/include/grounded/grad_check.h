#ifndef GROUNDED_GRAD_CHECK_H_
#define GROUNDED_GRAD_CHECK_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "grounded/params.h"

namespace grounded {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Coordinates sampled per tensor; tensors at most this large are checked
  // exhaustively.
  std::size_t samples_per_tensor = 16;
  std::uint64_t seed = 7;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
};

// Compares the analytic gradients stored in `params[i].grad` against central
// differences of `loss`, which must read the current values of
// `params[i].value`. Error per coordinate is
// |analytic - numeric| / max(1, |analytic| + |numeric|).
// Throws std::domain_error if the loss becomes non-finite.
GradCheckReport FiniteDiffCheck(const std::function<double()>& loss,
                                std::span<const ParamTensor> params,
                                const GradCheckOptions& options = {});

}  // namespace grounded

#endif  // GROUNDED_GRAD_CHECK_H_
