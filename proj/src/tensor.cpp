#include "favi/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace favi {

std::size_t shape_numel(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != data.size())
    throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  for (std::size_t dim : shape)
    if (dim == 0) throw std::invalid_argument("tensor: zero dimension in shape");
}

Tensor Tensor::zeros(const std::vector<std::size_t>& s) {
  return Tensor(s, std::vector<double>(shape_numel(s), 0.0));
}

Tensor Tensor::full(const std::vector<std::size_t>& s, double v) {
  return Tensor(s, std::vector<double>(shape_numel(s), v));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::row(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

double Tensor::value() const {
  if (!is_scalar()) throw std::logic_error("tensor: value() on non-scalar " + shape_str(shape));
  return data[0];
}

double& Tensor::at2(std::size_t i, std::size_t j) {
  return data[i * shape[1] + j];
}

double Tensor::at2(std::size_t i, std::size_t j) const {
  return data[i * shape[1] + j];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace favi
