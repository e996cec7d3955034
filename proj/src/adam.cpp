#include "favi/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace favi {

void Adam::step(ParamGraph& pg) {
  if (pg.param_count() == 0) throw std::invalid_argument("adam: no parameters");
  if (!pg.grads_finite()) throw std::runtime_error("adam: non-finite gradient");
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& name : pg.names()) {
    const Tensor& g = pg.grad(name);
    Tensor& p = pg.value(name);
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      m_.emplace(name, Tensor::zeros(p.shape));
      v_.emplace(name, Tensor::zeros(p.shape));
      mit = m_.find(name);
    }
    Tensor& m = mit->second;
    Tensor& v = v_.at(name);
    if (!m.same_shape(p)) throw std::runtime_error("adam: accumulator shape drift for '" + name + "'");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace favi
