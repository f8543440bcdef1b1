#include "grounded/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "grounded/rng.h"

namespace grounded {
namespace {

double CheckedLoss(const std::function<double()>& loss) {
  const double v = loss();
  if (!std::isfinite(v)) throw std::domain_error("loss is not finite");
  return v;
}

}  // namespace

GradCheckReport FiniteDiffCheck(const std::function<double()>& loss,
                                std::span<const ParamTensor> params,
                                const GradCheckOptions& options) {
  if (options.epsilon <= 0.0) {
    throw std::invalid_argument("epsilon must be positive");
  }
  CheckedLoss(loss);
  Rng rng(options.seed);
  GradCheckReport report;
  for (const ParamTensor& p : params) {
    std::vector<std::size_t> coords(p.value->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.samples_per_tensor) {
      rng.Shuffle(std::span(coords));
      coords.resize(options.samples_per_tensor);
    }
    auto values = p.value->values();
    const auto grads = p.grad->values();
    for (std::size_t k : coords) {
      const double saved = values[k];
      values[k] = saved + options.epsilon;
      const double plus = CheckedLoss(loss);
      values[k] = saved - options.epsilon;
      const double minus = CheckedLoss(loss);
      values[k] = saved;
      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double analytic = grads[k];
      const double err = std::abs(analytic - numeric) /
                         std::max(1.0, std::abs(analytic) + std::abs(numeric));
      ++report.coordinates_checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_tensor = std::string(p.name);
        report.worst_index = k;
      }
    }
  }
  return report;
}

}  // namespace grounded
