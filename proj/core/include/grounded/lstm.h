#ifndef GROUNDED_LSTM_H_
#define GROUNDED_LSTM_H_

#include <span>

#include "grounded/matrix.h"

namespace grounded {

// Activations of one LSTM step, kept for the backward pass. Gate order in
// the stacked weight matrix is input, forget, candidate, output.
struct LstmCache {
  Vec input;  // [x, h_prev]
  Vec c_prev;
  Vec i, f, g, o;
  Vec c, tanh_c, h;
};

// weights: 4H x (X + H); bias: 4H x 1.
void LstmForward(const Matrix& weights, const Matrix& bias,
                 std::span<const double> x, std::span<const double> h_prev,
                 std::span<const double> c_prev, LstmCache& cache);

// Accumulates parameter gradients and writes (not adds) dx, dh_prev, dc_prev.
void LstmBackward(const Matrix& weights, const LstmCache& cache,
                  std::span<const double> dh, std::span<const double> dc,
                  Matrix& d_weights, Matrix& d_bias, std::span<double> dx,
                  std::span<double> dh_prev, std::span<double> dc_prev);

// Forget-gate bias starts at 1.
void InitLstmBias(Matrix& bias);

}  // namespace grounded

#endif  // GROUNDED_LSTM_H_
