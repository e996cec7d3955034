#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace favi {

// Dense row-major tensor of 64-bit floats. Shapes are fixed at construction;
// any NaN/Inf entry is treated as an error state by the ops that produce it.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(const std::vector<std::size_t>& s);
  static Tensor full(const std::vector<std::size_t>& s, double v);
  static Tensor scalar(double v);
  static Tensor row(std::vector<double> v);

  std::size_t size() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }
  bool is_scalar() const { return data.size() == 1; }
  double value() const;

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  // 2-D access, row-major
  double& at2(std::size_t i, std::size_t j);
  double at2(std::size_t i, std::size_t j) const;

  bool all_finite() const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::size_t shape_numel(const std::vector<std::size_t>& s);
std::string shape_str(const std::vector<std::size_t>& s);

}  // namespace favi
