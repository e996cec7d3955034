#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "favi/tensor.hpp"

namespace favi {

// Named parameter store with matching gradient buffers. Single writer: one
// training loop mutates values/gradients; read-only forward evaluation of a
// frozen snapshot is safe from any number of threads.
class ParamGraph {
 public:
  void add(const std::string& name, Tensor init);

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& value(const std::string& name) const;
  Tensor& value(const std::string& name);
  const Tensor& grad(const std::string& name) const;
  Tensor& grad(const std::string& name);

  const std::vector<std::string>& names() const { return order_; }
  std::size_t param_count() const { return order_.size(); }
  std::size_t total_size() const;

  void zero_grad();
  double grad_norm() const;
  double param_norm() const;
  bool grads_finite() const;

 private:
  struct Entry {
    Tensor value;
    Tensor grad;
  };
  std::vector<std::string> order_;
  std::unordered_map<std::string, Entry> index_;

  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;
};

}  // namespace favi
