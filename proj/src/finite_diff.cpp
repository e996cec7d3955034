#include "favi/finite_diff.hpp"

#include <cmath>
#include <stdexcept>

namespace favi {

namespace {

double eval_loss(const LossBuilder& f, const ParamGraph& pg) {
  ad::Tape tape;
  double v = f(tape, pg).scalar();
  if (!std::isfinite(v)) throw std::runtime_error("finite_diff_check: non-finite loss at perturbed point");
  return v;
}

}  // namespace

double finite_diff_check(ParamGraph& pg, const LossBuilder& f, double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be positive");

  pg.zero_grad();
  {
    ad::Tape tape;
    ad::Value loss = f(tape, pg);
    tape.backward(loss);
    tape.grads_into(pg);
  }

  double max_rel = 0.0;
  const double denom_eps = 1e-12;
  for (const auto& name : pg.names()) {
    Tensor& p = pg.value(name);
    const Tensor& g = pg.grad(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      double saved = p[i];
      p[i] = saved + step;
      double fp = eval_loss(f, pg);
      p[i] = saved - step;
      double fm = eval_loss(f, pg);
      p[i] = saved;
      double central = (fp - fm) / (2.0 * step);
      double rel = std::abs(g[i] - central) / (std::abs(g[i]) + std::abs(central) + denom_eps);
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

}  // namespace favi
