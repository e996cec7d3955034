#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>

#include "favi/param_graph.hpp"

namespace favi {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment accumulators are keyed by parameter name
// and created on first use; the step counter is shared across parameters.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  // Consumes the gradients currently stored in pg. Throws on non-finite grads.
  void step(ParamGraph& pg);

  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::unordered_map<std::string, Tensor> m_;
  std::unordered_map<std::string, Tensor> v_;
};

}  // namespace favi
