#ifndef GROUNDED_ACTIVATIONS_H_
#define GROUNDED_ACTIVATIONS_H_

#include <cstdint>
#include <span>

#include "grounded/matrix.h"

namespace grounded {

// Shift-invariant softmax. Throws std::invalid_argument on empty or
// non-finite input.
Vec Softmax(std::span<const double> logits);

// Softmax restricted to cells with mask != 0; masked cells behave as a -inf
// logit and receive exactly zero mass. Requires at least one unmasked cell.
Vec MaskedSoftmax(std::span<const double> logits,
                  std::span<const std::uint8_t> mask);

// Hyperbolic tangent, (e^x - e^-x) / (e^x + e^-x).
double Htan(double x);
Vec Htan(std::span<const double> x);

double Sigmoid(double x);

// log(sum(exp(x))), stable.
double LogSumExp(std::span<const double> x);

std::size_t ArgMax(std::span<const double> x);

}  // namespace grounded

#endif  // GROUNDED_ACTIVATIONS_H_
