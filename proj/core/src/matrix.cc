#include "grounded/matrix.h"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace grounded {

void Matrix::Fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Matrix::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

Vec MatVec(const Matrix& m, std::span<const double> x) {
  Vec out(m.rows(), 0.0);
  MatVecAcc(m, x, out);
  return out;
}

void MatVecAcc(const Matrix& m, std::span<const double> x,
               std::span<double> out) {
  assert(x.size() == m.cols() && out.size() == m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out[r] += Dot(m.row(r), x);
  }
}

void MatTVecAcc(const Matrix& m, std::span<const double> y,
                std::span<double> out) {
  assert(y.size() == m.rows() && out.size() == m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (y[r] != 0.0) Axpy(y[r], m.row(r), out);
  }
}

void AddOuter(Matrix& g, std::span<const double> a, std::span<const double> b,
              double scale) {
  assert(a.size() == g.rows() && b.size() == g.cols());
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const double s = scale * a[r];
    if (s != 0.0) Axpy(s, b, g.row(r));
  }
}

double Dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void Axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

double SquaredNorm(std::span<const double> x) { return Dot(x, x); }

double CosineSimilarity(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(SquaredNorm(a));
  const double nb = std::sqrt(SquaredNorm(b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return Dot(a, b) / (na * nb);
}

}  // namespace grounded
