#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssfl {

// Dense row-major array of 64-bit floats. Shape is a list of positive dims;
// data length always equals the product of the dims.
struct DenseArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  DenseArray() = default;
  DenseArray(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != count(shape)) {
      throw std::invalid_argument("DenseArray: data length " +
                                  std::to_string(data.size()) +
                                  " does not match shape product " +
                                  std::to_string(count(shape)));
    }
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) {
      if (d == 0) throw std::invalid_argument("DenseArray: zero dimension");
      n *= d;
    }
    return n;
  }

  static DenseArray zeros(std::vector<std::size_t> s) {
    std::size_t n = count(s);
    return DenseArray(std::move(s), std::vector<double>(n, 0.0));
  }

  static DenseArray full(std::vector<std::size_t> s, double v) {
    std::size_t n = count(s);
    return DenseArray(std::move(s), std::vector<double>(n, v));
  }

  static DenseArray scalar(double v) { return DenseArray({1}, {v}); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  std::size_t dim(std::size_t i) const {
    if (i >= shape.size()) throw std::out_of_range("DenseArray::dim");
    return shape[i];
  }

  double& at2(std::size_t i, std::size_t j) {
    return data[i * shape[1] + j];
  }
  double at2(std::size_t i, std::size_t j) const {
    return data[i * shape[1] + j];
  }

  bool same_shape(const DenseArray& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

}  // namespace ssfl
