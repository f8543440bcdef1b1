#include "grounded/lstm.h"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "grounded/activations.h"

namespace grounded {

void LstmForward(const Matrix& weights, const Matrix& bias,
                 std::span<const double> x, std::span<const double> h_prev,
                 std::span<const double> c_prev, LstmCache& cache) {
  const std::size_t hidden = h_prev.size();
  assert(weights.rows() == 4 * hidden);
  assert(weights.cols() == x.size() + hidden);
  cache.input.assign(x.begin(), x.end());
  cache.input.insert(cache.input.end(), h_prev.begin(), h_prev.end());
  cache.c_prev.assign(c_prev.begin(), c_prev.end());

  Vec pre(bias.values().begin(), bias.values().end());
  MatVecAcc(weights, cache.input, pre);

  cache.i.resize(hidden);
  cache.f.resize(hidden);
  cache.g.resize(hidden);
  cache.o.resize(hidden);
  cache.c.resize(hidden);
  cache.tanh_c.resize(hidden);
  cache.h.resize(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    cache.i[k] = Sigmoid(pre[k]);
    cache.f[k] = Sigmoid(pre[hidden + k]);
    cache.g[k] = std::tanh(pre[2 * hidden + k]);
    cache.o[k] = Sigmoid(pre[3 * hidden + k]);
    cache.c[k] = cache.f[k] * c_prev[k] + cache.i[k] * cache.g[k];
    cache.tanh_c[k] = std::tanh(cache.c[k]);
    cache.h[k] = cache.o[k] * cache.tanh_c[k];
  }
}

void LstmBackward(const Matrix& weights, const LstmCache& cache,
                  std::span<const double> dh, std::span<const double> dc,
                  Matrix& d_weights, Matrix& d_bias, std::span<double> dx,
                  std::span<double> dh_prev, std::span<double> dc_prev) {
  const std::size_t hidden = cache.h.size();
  const std::size_t in = cache.input.size() - hidden;
  assert(dx.size() == in && dh_prev.size() == hidden);

  Vec dpre(4 * hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    const double d_o = dh[k] * cache.tanh_c[k];
    const double d_c =
        dc[k] + dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
    const double d_i = d_c * cache.g[k];
    const double d_f = d_c * cache.c_prev[k];
    const double d_g = d_c * cache.i[k];
    dc_prev[k] = d_c * cache.f[k];
    dpre[k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
    dpre[hidden + k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
    dpre[2 * hidden + k] = d_g * (1.0 - cache.g[k] * cache.g[k]);
    dpre[3 * hidden + k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
  }
  AddOuter(d_weights, dpre, cache.input);
  Axpy(1.0, dpre, d_bias.values());

  Vec dinput(cache.input.size(), 0.0);
  MatTVecAcc(weights, dpre, dinput);
  std::copy(dinput.begin(), dinput.begin() + in, dx.begin());
  std::copy(dinput.begin() + in, dinput.end(), dh_prev.begin());
}

void InitLstmBias(Matrix& bias) {
  const std::size_t hidden = bias.rows() / 4;
  bias.Fill(0.0);
  for (std::size_t k = 0; k < hidden; ++k) bias(hidden + k, 0) = 1.0;
}

}  // namespace grounded
