#ifndef GROUNDED_PARAMS_H_
#define GROUNDED_PARAMS_H_

#include <string_view>
#include <vector>

#include "grounded/matrix.h"

namespace grounded {

// A named learned weight together with the buffer holding its gradient.
struct ParamTensor {
  std::string_view name;
  Matrix* value = nullptr;
  Matrix* grad = nullptr;
};

// Pairs the tensors of `params` with those of `grads` (same model type).
// Model types expose `template <class F> void ForEach(F&&)` visiting
// (name, Matrix&) in a fixed order.
template <typename Model>
std::vector<ParamTensor> Bind(Model& params, Model& grads) {
  std::vector<ParamTensor> out;
  params.ForEach([&](std::string_view name, Matrix& m) {
    out.push_back({name, &m, nullptr});
  });
  std::size_t i = 0;
  grads.ForEach([&](std::string_view, Matrix& m) { out[i++].grad = &m; });
  return out;
}

template <typename Model>
Model ZerosLike(const Model& params) {
  Model out = params;
  out.ForEach([](std::string_view, Matrix& m) { m.Fill(0.0); });
  return out;
}

template <typename Model>
bool AllFinite(Model& params) {
  bool ok = true;
  params.ForEach([&](std::string_view, Matrix& m) { ok = ok && m.AllFinite(); });
  return ok;
}

}  // namespace grounded

#endif  // GROUNDED_PARAMS_H_
