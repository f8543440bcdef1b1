#ifndef GROUNDED_RNG_H_
#define GROUNDED_RNG_H_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

#include "grounded/matrix.h"

namespace grounded {

// Seeded generator. The engine is std::mt19937_64, whose output sequence is
// fixed by the standard; the distributions below are hand-rolled because the
// std:: ones are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t NextU64() { return engine_(); }
  // [0, 1)
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Standard normal via Box-Muller.
  double Normal();
  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }
  // [0, n)
  std::size_t Index(std::size_t n);
  // [lo, hi]
  int IntIn(int lo, int hi);
  bool Bernoulli(double p) { return Uniform() < p; }

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[Index(i)]);
    }
  }

  // Independent stream derived from this generator's seed and a name.
  Rng Substream(std::string_view name) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t Fnv1a64(std::string_view bytes);
std::uint64_t SplitMix64(std::uint64_t x);

// Uniform in [-r, r], r = sqrt(6 / (fan_in + fan_out)).
void XavierInit(Matrix& m, Rng& rng);

}  // namespace grounded

#endif  // GROUNDED_RNG_H_
