#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace srst {

/// Dense row-major array of doubles. Batches are rank-2 `[rows, cols]`;
/// scalars are `[1, 1]`.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor filled(std::vector<std::size_t> shape, double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
  }
  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

  [[nodiscard]] const std::vector<std::size_t>& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] std::size_t rank() const { return shape_.size(); }
  [[nodiscard]] std::size_t rows() const;
  [[nodiscard]] std::size_t cols() const;

  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }
  [[nodiscard]] const std::vector<double>& data() const { return values_; }

  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * cols(), cols());
  }
  [[nodiscard]] std::span<double> row(std::size_t i) {
    return std::span<double>(values_).subspan(i * cols(), cols());
  }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols() + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols() + j]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  [[nodiscard]] bool all_finite() const;
  [[nodiscard]] std::string shape_string() const;

  /// Copy of the listed rows, in order.
  [[nodiscard]] Tensor select_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

// Throws std::domain_error naming `what` if any entry is NaN or infinite.
void require_finite(const Tensor& t, const char* what);

}  // namespace srst
