#ifndef TGCMC_DIFF_TENSOR_HPP_
#define TGCMC_DIFF_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tgcmc::diff {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major buffer of doubles. Every op in the library treats a tensor
// as a matrix: rank 0 is 1x1, rank 1 is n x 1, and rank >= 2 folds trailing
// dimensions into columns.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor(Shape{rows, cols}, fill);
  }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor scalar(double value) { return Tensor(Shape{1, 1}, value); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  // Value of a single-element tensor.
  double item() const;
  bool all_finite() const;
  void fill(double value);

  // Exact (bitwise for finite values) comparison of shape and contents.
  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace tgcmc::diff

#endif  // TGCMC_DIFF_TENSOR_HPP_
