#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "favi/tensor.hpp"

namespace favi {
class ParamGraph;
}

namespace favi::ad {

class Tape;

// Handle to a node recorded on a tape. Valid until the tape is cleared.
struct Value {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& tensor() const;
  double scalar() const;
};

// Reverse-mode tape over dense tensors. One tape records one forward pass;
// backward() walks it once in reverse. Every op checks its result for
// non-finite entries and throws.
class Tape {
 public:
  Value leaf(Tensor v, bool needs_grad = false);
  Value constant(Tensor v) { return leaf(std::move(v), false); }
  Value constant(double v) { return leaf(Tensor::scalar(v), false); }

  // Leaf bound to a named parameter of `pg`. Repeated use within one tape
  // returns the same node, so gradients accumulate across uses.
  Value param(const ParamGraph& pg, const std::string& name);

  // w:[out,in], x:[in] or [batch,in], b:[out]
  Value affine(Value w, Value x, Value b);
  Value relu(Value x);
  Value tanh(Value x);
  Value softplus(Value x);
  Value exp(Value x);
  Value square(Value x);
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value scale(Value a, double c);
  Value add_scalar(Value a, double c);
  Value neg(Value a) { return scale(a, -1.0); }
  Value sum(Value a);
  Value mean(Value a);
  Value dot(Value a, Value b);
  Value clamp(Value a, double lo, double hi);
  Value softmax(Value a);     // 1-D
  Value logsumexp(Value a);   // 1-D -> scalar, max-subtracted
  Value concat(Value a, Value b);                    // 1-D
  Value gather(Value a, std::vector<std::size_t> idx);  // 1-D
  Value slice(Value a, std::size_t begin, std::size_t len);  // 1-D contiguous
  Value row(Value a, std::size_t i);   // [R,C] -> [C]
  Value col(Value a, std::size_t j);   // [R,C] -> [R]
  Value row_mean(Value a);             // [R,C] -> [C]

  // Causal dilated 1-D convolution with implicit zero left-padding.
  // input:[cin,T], kernel:[cout,cin,K] flattened row-major, bias:[cout] -> [cout,T]
  // Tap k looks back k*dilation samples.
  Value conv1d(Value input, Value kernel, Value bias, std::size_t dilation);

  // sum_k log N(z_k; mu_k, exp(log_sigma_k)^2) -> scalar
  Value gaussian_log_prob(Value mu, Value log_sigma, const Tensor& z);
  Value gaussian_log_prob(Value mu, Value log_sigma, Value z);
  // sum_k [y_k log p_k + (1-y_k) log(1-p_k)], p = sigmoid(logits) -> scalar
  Value bernoulli_log_prob(Value logits, const Tensor& y);

  Value mean_of(const std::vector<Value>& xs);  // average of scalars

  // Seeds the output gradient and propagates back through the tape.
  void backward(Value out);                       // scalar out, seed 1
  void backward(Value out, const Tensor& out_grad);

  const Tensor& value(Value v) const;
  const Tensor& grad(Value v) const;  // zeros-shaped empty if no flow reached it

  // Accumulates parameter-leaf gradients into pg's gradient store.
  void grads_into(ParamGraph& pg) const;

  std::size_t node_count() const { return nodes_.size(); }
  bool backward_ran() const { return backward_ran_; }
  void clear();

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::vector<int> parents;
    std::function<void(Tape&, int)> backprop;
    std::string param_name;
  };

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_ids_;
  Tensor empty_;
  bool backward_ran_ = false;

  int push(const char* op, Tensor value, std::vector<int> parents,
           std::function<void(Tape&, int)> backprop, std::string param_name = {});
  Tensor& grad_buf(int id);
  bool wants_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  void check_tape(Value v, const char* op) const;

  friend struct Value;
};

}  // namespace favi::ad
