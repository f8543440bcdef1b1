#ifndef GROUNDED_MATRIX_H_
#define GROUNDED_MATRIX_H_

#include <cstddef>
#include <span>
#include <vector>

namespace grounded {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Column vectors (biases) are n x 1.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return values_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  void Fill(double v);
  bool AllFinite() const;
  bool SameShape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// out = m * x
Vec MatVec(const Matrix& m, std::span<const double> x);
// out += m * x
void MatVecAcc(const Matrix& m, std::span<const double> x,
               std::span<double> out);
// out += m^T * y
void MatTVecAcc(const Matrix& m, std::span<const double> y,
                std::span<double> out);
// g += scale * a * b^T
void AddOuter(Matrix& g, std::span<const double> a, std::span<const double> b,
              double scale = 1.0);

double Dot(std::span<const double> a, std::span<const double> b);
// y += a * x
void Axpy(double a, std::span<const double> x, std::span<double> y);
double SquaredNorm(std::span<const double> x);
double CosineSimilarity(std::span<const double> a, std::span<const double> b);

}  // namespace grounded

#endif  // GROUNDED_MATRIX_H_
