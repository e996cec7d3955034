#include "favi/param_graph.hpp"

#include <cmath>
#include <stdexcept>

namespace favi {

void ParamGraph::add(const std::string& name, Tensor init) {
  if (name.empty()) throw std::invalid_argument("param_graph: empty parameter name");
  if (has(name)) throw std::invalid_argument("param_graph: duplicate parameter '" + name + "'");
  if (!init.all_finite()) throw std::invalid_argument("param_graph: non-finite init for '" + name + "'");
  Entry e;
  e.grad = Tensor::zeros(init.shape);
  e.value = std::move(init);
  order_.push_back(name);
  index_.emplace(name, std::move(e));
}

ParamGraph::Entry& ParamGraph::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("param_graph: unknown parameter '" + name + "'");
  return it->second;
}

const ParamGraph::Entry& ParamGraph::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("param_graph: unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamGraph::value(const std::string& name) const { return entry(name).value; }
Tensor& ParamGraph::value(const std::string& name) { return entry(name).value; }
const Tensor& ParamGraph::grad(const std::string& name) const { return entry(name).grad; }
Tensor& ParamGraph::grad(const std::string& name) { return entry(name).grad; }

std::size_t ParamGraph::total_size() const {
  std::size_t n = 0;
  for (const auto& name : order_) n += value(name).size();
  return n;
}

void ParamGraph::zero_grad() {
  for (const auto& name : order_) {
    Tensor& g = grad(name);
    std::fill(g.data.begin(), g.data.end(), 0.0);
  }
}

double ParamGraph::grad_norm() const {
  double s = 0.0;
  for (const auto& name : order_)
    for (double v : grad(name).data) s += v * v;
  return std::sqrt(s);
}

double ParamGraph::param_norm() const {
  double s = 0.0;
  for (const auto& name : order_)
    for (double v : value(name).data) s += v * v;
  return std::sqrt(s);
}

bool ParamGraph::grads_finite() const {
  for (const auto& name : order_)
    if (!grad(name).all_finite()) return false;
  return true;
}

}  // namespace favi
