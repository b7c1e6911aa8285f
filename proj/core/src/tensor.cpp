#include "srst/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace srst {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (element_count(shape_) != values_.size()) {
    throw std::invalid_argument("tensor shape " + shape_string() + " does not match " +
                                std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(std::vector<std::size_t> shape, double value) {
  const std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) throw std::logic_error("rows() on non-matrix tensor " + shape_string());
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) throw std::logic_error("cols() on non-matrix tensor " + shape_string());
  return shape_[1];
}

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

Tensor Tensor::select_rows(std::span<const std::size_t> indices) const {
  const std::size_t c = cols();
  std::vector<double> out;
  out.reserve(indices.size() * c);
  for (std::size_t i : indices) {
    if (i >= rows()) throw std::out_of_range("row index " + std::to_string(i) + " out of range");
    auto r = row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return Tensor({indices.size(), c}, std::move(out));
}

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw std::domain_error(std::string(what) + ": non-finite value");
}

}  // namespace srst
