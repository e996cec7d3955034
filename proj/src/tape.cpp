#include "favi/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "favi/param_graph.hpp"

namespace favi::ad {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_stable(double x) {
  if (x > 34.0) return x;  // exp(-x) below double epsilon of x
  if (x < -34.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

const Tensor& Value::tensor() const {
  if (!valid()) throw std::logic_error("tape: use of invalid value handle");
  return tape->value(*this);
}

double Value::scalar() const { return tensor().value(); }

void Tape::check_tape(Value v, const char* op) const {
  if (!v.valid() || v.tape != this || v.id >= static_cast<int>(nodes_.size()))
    throw std::logic_error(std::string("tape: ") + op + " given a value from another or cleared tape");
}

int Tape::push(const char* op, Tensor value, std::vector<int> parents,
               std::function<void(Tape&, int)> backprop, std::string param_name) {
  if (!value.all_finite())
    throw std::runtime_error(std::string("tape: non-finite result in ") + op);
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (int p : n.parents)
    if (nodes_[static_cast<std::size_t>(p)].needs_grad) n.needs_grad = true;
  if (!param_name.empty()) n.needs_grad = true;
  n.backprop = n.needs_grad ? std::move(backprop) : nullptr;
  n.param_name = std::move(param_name);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

Value Tape::leaf(Tensor v, bool needs_grad) {
  Node n;
  if (!v.all_finite()) throw std::runtime_error("tape: non-finite leaf tensor");
  n.value = std::move(v);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Value Tape::param(const ParamGraph& pg, const std::string& name) {
  auto it = param_ids_.find(name);
  if (it != param_ids_.end()) return {this, it->second};
  Node n;
  n.value = pg.value(name);
  n.needs_grad = true;
  n.param_name = name;
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size()) - 1;
  param_ids_.emplace(name, id);
  return {this, id};
}

Value Tape::affine(Value w, Value x, Value b) {
  check_tape(w, "affine");
  check_tape(x, "affine");
  check_tape(b, "affine");
  const Tensor& wt = val(w.id);
  const Tensor& xt = val(x.id);
  const Tensor& bt = val(b.id);
  if (wt.ndim() != 2) throw std::invalid_argument("affine: weight must be 2-D, got " + shape_str(wt.shape));
  std::size_t out = wt.shape[0], in = wt.shape[1];
  if (bt.size() != out) throw std::invalid_argument("affine: bias length mismatch");
  bool batched = xt.ndim() == 2;
  std::size_t batch = batched ? xt.shape[0] : 1;
  std::size_t xin = batched ? xt.shape[1] : xt.size();
  if (xin != in)
    throw std::invalid_argument("affine: input width " + std::to_string(xin) +
                                " does not match weight " + shape_str(wt.shape));

  Tensor y = batched ? Tensor::zeros({batch, out}) : Tensor::zeros({out});
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const double* xp = xt.data.data() + bi * in;
    double* yp = y.data.data() + bi * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wp = wt.data.data() + o * in;
      double acc = bt[o];
      for (std::size_t i = 0; i < in; ++i) acc += wp[i] * xp[i];
      yp[o] = acc;
    }
  }

  int wid = w.id, xid = x.id, bid = b.id;
  int id = push("affine", std::move(y), {wid, xid, bid}, [wid, xid, bid, batch, out, in](Tape& t, int self) {
    const Tensor& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    const Tensor& wt2 = t.val(wid);
    const Tensor& xt2 = t.val(xid);
    bool need_w = t.wants_grad(wid), need_x = t.wants_grad(xid), need_b = t.wants_grad(bid);
    Tensor* gw = need_w ? &t.grad_buf(wid) : nullptr;
    Tensor* gx = need_x ? &t.grad_buf(xid) : nullptr;
    Tensor* gb = need_b ? &t.grad_buf(bid) : nullptr;
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const double* gp = g.data.data() + bi * out;
      const double* xp = xt2.data.data() + bi * in;
      for (std::size_t o = 0; o < out; ++o) {
        double go = gp[o];
        if (go == 0.0) continue;
        if (gb) gb->data[o] += go;
        if (gw) {
          double* gwp = gw->data.data() + o * in;
          for (std::size_t i = 0; i < in; ++i) gwp[i] += go * xp[i];
        }
        if (gx) {
          double* gxp = gx->data.data() + bi * in;
          const double* wp = wt2.data.data() + o * in;
          for (std::size_t i = 0; i < in; ++i) gxp[i] += go * wp[i];
        }
      }
    }
  });
  return {this, id};
}

Value Tape::relu(Value x) {
  check_tape(x, "relu");
  Tensor y = val(x.id);
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  int xid = x.id;
  int id = push("relu", std::move(y), {xid}, [xid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(xid)) return;
    Tensor& gx = t.grad_buf(xid);
    const Tensor& xt = t.val(xid);
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xt[i] > 0.0) gx[i] += n.grad[i];
  });
  return {this, id};
}

Value Tape::tanh(Value x) {
  check_tape(x, "tanh");
  Tensor y = val(x.id);
  for (double& v : y.data) v = std::tanh(v);
  int xid = x.id;
  int id = push("tanh", std::move(y), {xid}, [xid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(xid)) return;
    Tensor& gx = t.grad_buf(xid);
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
  });
  return {this, id};
}

Value Tape::softplus(Value x) {
  check_tape(x, "softplus");
  Tensor y = val(x.id);
  for (double& v : y.data) v = softplus_stable(v);
  int xid = x.id;
  int id = push("softplus", std::move(y), {xid}, [xid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(xid)) return;
    Tensor& gx = t.grad_buf(xid);
    const Tensor& xt = t.val(xid);
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += n.grad[i] * sigmoid(xt[i]);
  });
  return {this, id};
}

Value Tape::exp(Value x) {
  check_tape(x, "exp");
  Tensor y = val(x.id);
  for (double& v : y.data) v = std::exp(v);
  int xid = x.id;
  int id = push("exp", std::move(y), {xid}, [xid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(xid)) return;
    Tensor& gx = t.grad_buf(xid);
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += n.grad[i] * n.value[i];
  });
  return {this, id};
}

Value Tape::square(Value x) {
  check_tape(x, "square");
  Tensor y = val(x.id);
  for (double& v : y.data) v = v * v;
  int xid = x.id;
  int id = push("square", std::move(y), {xid}, [xid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(xid)) return;
    Tensor& gx = t.grad_buf(xid);
    const Tensor& xt = t.val(xid);
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += n.grad[i] * 2.0 * xt[i];
  });
  return {this, id};
}

Value Tape::add(Value a, Value b) {
  check_tape(a, "add");
  check_tape(b, "add");
  const Tensor& at = val(a.id);
  const Tensor& bt = val(b.id);
  if (!at.same_shape(bt))
    throw std::invalid_argument("add: shape mismatch " + shape_str(at.shape) + " vs " + shape_str(bt.shape));
  Tensor y = at;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bt[i];
  int aid = a.id, bid = b.id;
  int id = push("add", std::move(y), {aid, bid}, [aid, bid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    for (int pid : {aid, bid}) {
      if (!t.wants_grad(pid)) continue;
      Tensor& gp = t.grad_buf(pid);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += n.grad[i];
    }
  });
  return {this, id};
}

Value Tape::sub(Value a, Value b) {
  check_tape(a, "sub");
  check_tape(b, "sub");
  const Tensor& at = val(a.id);
  const Tensor& bt = val(b.id);
  if (!at.same_shape(bt))
    throw std::invalid_argument("sub: shape mismatch " + shape_str(at.shape) + " vs " + shape_str(bt.shape));
  Tensor y = at;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bt[i];
  int aid = a.id, bid = b.id;
  int id = push("sub", std::move(y), {aid, bid}, [aid, bid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (t.wants_grad(aid)) {
      Tensor& ga = t.grad_buf(aid);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
    }
    if (t.wants_grad(bid)) {
      Tensor& gb = t.grad_buf(bid);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= n.grad[i];
    }
  });
  return {this, id};
}

Value Tape::mul(Value a, Value b) {
  check_tape(a, "mul");
  check_tape(b, "mul");
  const Tensor& at = val(a.id);
  const Tensor& bt = val(b.id);
  if (!at.same_shape(bt))
    throw std::invalid_argument("mul: shape mismatch " + shape_str(at.shape) + " vs " + shape_str(bt.shape));
  Tensor y = at;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bt[i];
  int aid = a.id, bid = b.id;
  int id = push("mul", std::move(y), {aid, bid}, [aid, bid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& at2 = t.val(aid);
    const Tensor& bt2 = t.val(bid);
    if (t.wants_grad(aid)) {
      Tensor& ga = t.grad_buf(aid);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * bt2[i];
    }
    if (t.wants_grad(bid)) {
      Tensor& gb = t.grad_buf(bid);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[i] * at2[i];
    }
  });
  return {this, id};
}

Value Tape::scale(Value a, double c) {
  check_tape(a, "scale");
  Tensor y = val(a.id);
  for (double& v : y.data) v *= c;
  int aid = a.id;
  int id = push("scale", std::move(y), {aid}, [aid, c](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * n.grad[i];
  });
  return {this, id};
}

Value Tape::add_scalar(Value a, double c) {
  check_tape(a, "add_scalar");
  Tensor y = val(a.id);
  for (double& v : y.data) v += c;
  int aid = a.id;
  int id = push("add_scalar", std::move(y), {aid}, [aid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
  });
  return {this, id};
}

Value Tape::sum(Value a) {
  check_tape(a, "sum");
  const Tensor& at = val(a.id);
  double s = 0.0;
  for (double v : at.data) s += v;
  int aid = a.id;
  int id = push("sum", Tensor::scalar(s), {aid}, [aid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    double g = n.grad[0];
    for (double& v : ga.data) v += g;
  });
  return {this, id};
}

Value Tape::mean(Value a) {
  check_tape(a, "mean");
  const Tensor& at = val(a.id);
  double s = 0.0;
  for (double v : at.data) s += v;
  double inv = 1.0 / static_cast<double>(at.size());
  int aid = a.id;
  int id = push("mean", Tensor::scalar(s * inv), {aid}, [aid, inv](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    double g = n.grad[0] * inv;
    for (double& v : ga.data) v += g;
  });
  return {this, id};
}

Value Tape::dot(Value a, Value b) {
  check_tape(a, "dot");
  check_tape(b, "dot");
  const Tensor& at = val(a.id);
  const Tensor& bt = val(b.id);
  if (!at.same_shape(bt)) throw std::invalid_argument("dot: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < at.size(); ++i) s += at[i] * bt[i];
  int aid = a.id, bid = b.id;
  int id = push("dot", Tensor::scalar(s), {aid, bid}, [aid, bid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    double g = n.grad[0];
    const Tensor& at2 = t.val(aid);
    const Tensor& bt2 = t.val(bid);
    if (t.wants_grad(aid)) {
      Tensor& ga = t.grad_buf(aid);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bt2[i];
    }
    if (t.wants_grad(bid)) {
      Tensor& gb = t.grad_buf(bid);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * at2[i];
    }
  });
  return {this, id};
}

Value Tape::clamp(Value a, double lo, double hi) {
  check_tape(a, "clamp");
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  Tensor y = val(a.id);
  for (double& v : y.data) v = std::min(std::max(v, lo), hi);
  int aid = a.id;
  int id = push("clamp", std::move(y), {aid}, [aid, lo, hi](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    const Tensor& at2 = t.val(aid);
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (at2[i] >= lo && at2[i] <= hi) ga[i] += n.grad[i];
  });
  return {this, id};
}

Value Tape::softmax(Value a) {
  check_tape(a, "softmax");
  const Tensor& at = val(a.id);
  if (at.ndim() != 1) throw std::invalid_argument("softmax: expects 1-D input");
  double m = *std::max_element(at.data.begin(), at.data.end());
  Tensor y = at;
  double s = 0.0;
  for (double& v : y.data) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : y.data) v /= s;
  int aid = a.id;
  int id = push("softmax", std::move(y), {aid}, [aid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    double inner = 0.0;
    for (std::size_t i = 0; i < n.value.size(); ++i) inner += n.grad[i] * n.value[i];
    for (std::size_t i = 0; i < ga.size(); ++i)
      ga[i] += n.value[i] * (n.grad[i] - inner);
  });
  return {this, id};
}

Value Tape::logsumexp(Value a) {
  check_tape(a, "logsumexp");
  const Tensor& at = val(a.id);
  if (at.ndim() != 1) throw std::invalid_argument("logsumexp: expects 1-D input");
  double m = *std::max_element(at.data.begin(), at.data.end());
  double s = 0.0;
  for (double v : at.data) s += std::exp(v - m);
  double out = m + std::log(s);
  int aid = a.id;
  int id = push("logsumexp", Tensor::scalar(out), {aid}, [aid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    const Tensor& at2 = t.val(aid);
    double g = n.grad[0];
    double lse = n.value[0];
    for (std::size_t i = 0; i < ga.size(); ++i)
      ga[i] += g * std::exp(at2[i] - lse);
  });
  return {this, id};
}

Value Tape::concat(Value a, Value b) {
  check_tape(a, "concat");
  check_tape(b, "concat");
  const Tensor& at = val(a.id);
  const Tensor& bt = val(b.id);
  if (at.ndim() != 1 || bt.ndim() != 1) throw std::invalid_argument("concat: expects 1-D inputs");
  Tensor y = Tensor::zeros({at.size() + bt.size()});
  std::copy(at.data.begin(), at.data.end(), y.data.begin());
  std::copy(bt.data.begin(), bt.data.end(), y.data.begin() + static_cast<long>(at.size()));
  std::size_t na = at.size();
  int aid = a.id, bid = b.id;
  int id = push("concat", std::move(y), {aid, bid}, [aid, bid, na](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (t.wants_grad(aid)) {
      Tensor& ga = t.grad_buf(aid);
      for (std::size_t i = 0; i < na; ++i) ga[i] += n.grad[i];
    }
    if (t.wants_grad(bid)) {
      Tensor& gb = t.grad_buf(bid);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[na + i];
    }
  });
  return {this, id};
}

Value Tape::gather(Value a, std::vector<std::size_t> idx) {
  check_tape(a, "gather");
  const Tensor& at = val(a.id);
  if (at.ndim() != 1) throw std::invalid_argument("gather: expects 1-D input");
  Tensor y = Tensor::zeros({idx.size()});
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= at.size()) throw std::out_of_range("gather: index out of range");
    y[j] = at[idx[j]];
  }
  int aid = a.id;
  int id = push("gather", std::move(y), {aid}, [aid, idx = std::move(idx)](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    for (std::size_t j = 0; j < idx.size(); ++j) ga[idx[j]] += n.grad[j];
  });
  return {this, id};
}

Value Tape::slice(Value a, std::size_t begin, std::size_t len) {
  check_tape(a, "slice");
  const Tensor& at = val(a.id);
  if (at.ndim() != 1) throw std::invalid_argument("slice: expects 1-D input");
  if (begin + len > at.size()) throw std::out_of_range("slice: range out of bounds");
  Tensor y = Tensor::zeros({len});
  std::copy(at.data.begin() + static_cast<long>(begin),
            at.data.begin() + static_cast<long>(begin + len), y.data.begin());
  int aid = a.id;
  int id = push("slice", std::move(y), {aid}, [aid, begin, len](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    for (std::size_t i = 0; i < len; ++i) ga[begin + i] += n.grad[i];
  });
  return {this, id};
}

Value Tape::row(Value a, std::size_t i) {
  check_tape(a, "row");
  const Tensor& at = val(a.id);
  if (at.ndim() != 2) throw std::invalid_argument("row: expects 2-D input");
  std::size_t rows = at.shape[0], cols = at.shape[1];
  if (i >= rows) throw std::out_of_range("row: index out of range");
  Tensor y = Tensor::zeros({cols});
  std::copy(at.data.begin() + static_cast<long>(i * cols),
            at.data.begin() + static_cast<long>((i + 1) * cols), y.data.begin());
  int aid = a.id;
  int id = push("row", std::move(y), {aid}, [aid, i, cols](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    for (std::size_t j = 0; j < cols; ++j) ga.data[i * cols + j] += n.grad[j];
  });
  return {this, id};
}

Value Tape::col(Value a, std::size_t j) {
  check_tape(a, "col");
  const Tensor& at = val(a.id);
  if (at.ndim() != 2) throw std::invalid_argument("col: expects 2-D input");
  std::size_t rows = at.shape[0], cols = at.shape[1];
  if (j >= cols) throw std::out_of_range("col: index out of range");
  Tensor y = Tensor::zeros({rows});
  for (std::size_t i = 0; i < rows; ++i) y[i] = at.data[i * cols + j];
  int aid = a.id;
  int id = push("col", std::move(y), {aid}, [aid, j, cols](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    for (std::size_t i = 0; i < n.value.size(); ++i) ga.data[i * cols + j] += n.grad[i];
  });
  return {this, id};
}

Value Tape::row_mean(Value a) {
  check_tape(a, "row_mean");
  const Tensor& at = val(a.id);
  if (at.ndim() != 2) throw std::invalid_argument("row_mean: expects 2-D input");
  std::size_t rows = at.shape[0], cols = at.shape[1];
  Tensor y = Tensor::zeros({cols});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) y[j] += at.data[i * cols + j];
  double inv = 1.0 / static_cast<double>(rows);
  for (double& v : y.data) v *= inv;
  int aid = a.id;
  int id = push("row_mean", std::move(y), {aid}, [aid, rows, cols, inv](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(aid)) return;
    Tensor& ga = t.grad_buf(aid);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) ga.data[i * cols + j] += inv * n.grad[j];
  });
  return {this, id};
}

Value Tape::conv1d(Value input, Value kernel, Value bias, std::size_t dilation) {
  check_tape(input, "conv1d");
  check_tape(kernel, "conv1d");
  check_tape(bias, "conv1d");
  if (dilation == 0) throw std::invalid_argument("conv1d: dilation must be positive");
  const Tensor& xt = val(input.id);
  const Tensor& kt = val(kernel.id);
  const Tensor& bt = val(bias.id);
  if (xt.ndim() != 2 || kt.ndim() != 3) throw std::invalid_argument("conv1d: input [cin,T], kernel [cout,cin,K]");
  std::size_t cin = xt.shape[0], tlen = xt.shape[1];
  std::size_t cout = kt.shape[0], kcin = kt.shape[1], kw = kt.shape[2];
  if (kcin != cin) throw std::invalid_argument("conv1d: channel mismatch");
  if (bt.size() != cout) throw std::invalid_argument("conv1d: bias length mismatch");

  Tensor y = Tensor::zeros({cout, tlen});
  for (std::size_t o = 0; o < cout; ++o) {
    double* yp = y.data.data() + o * tlen;
    for (std::size_t tt = 0; tt < tlen; ++tt) yp[tt] = bt[o];
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* xp = xt.data.data() + ci * tlen;
      const double* kp = kt.data.data() + (o * cin + ci) * kw;
      for (std::size_t k = 0; k < kw; ++k) {
        double kv = kp[k];
        if (kv == 0.0) continue;
        std::size_t back = k * dilation;
        for (std::size_t tt = back; tt < tlen; ++tt) yp[tt] += kv * xp[tt - back];
      }
    }
  }

  int xid = input.id, kid = kernel.id, bid = bias.id;
  int id = push("conv1d", std::move(y), {xid, kid, bid},
                [xid, kid, bid, cin, tlen, cout, kw, dilation](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& xt2 = t.val(xid);
    const Tensor& kt2 = t.val(kid);
    bool need_x = t.wants_grad(xid), need_k = t.wants_grad(kid), need_b = t.wants_grad(bid);
    Tensor* gx = need_x ? &t.grad_buf(xid) : nullptr;
    Tensor* gk = need_k ? &t.grad_buf(kid) : nullptr;
    Tensor* gb = need_b ? &t.grad_buf(bid) : nullptr;
    for (std::size_t o = 0; o < cout; ++o) {
      const double* gp = n.grad.data.data() + o * tlen;
      if (gb) {
        double acc = 0.0;
        for (std::size_t tt = 0; tt < tlen; ++tt) acc += gp[tt];
        gb->data[o] += acc;
      }
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* xp = xt2.data.data() + ci * tlen;
        const double* kp = kt2.data.data() + (o * cin + ci) * kw;
        double* gxp = gx ? gx->data.data() + ci * tlen : nullptr;
        double* gkp = gk ? gk->data.data() + (o * cin + ci) * kw : nullptr;
        for (std::size_t k = 0; k < kw; ++k) {
          std::size_t back = k * dilation;
          if (gkp) {
            double acc = 0.0;
            for (std::size_t tt = back; tt < tlen; ++tt) acc += gp[tt] * xp[tt - back];
            gkp[k] += acc;
          }
          if (gxp) {
            double kv = kp[k];
            if (kv != 0.0)
              for (std::size_t tt = back; tt < tlen; ++tt) gxp[tt - back] += gp[tt] * kv;
          }
        }
      }
    }
  });
  return {this, id};
}

Value Tape::gaussian_log_prob(Value mu, Value log_sigma, const Tensor& z) {
  return gaussian_log_prob(mu, log_sigma, constant(z));
}

Value Tape::gaussian_log_prob(Value mu, Value log_sigma, Value z) {
  check_tape(mu, "gaussian_log_prob");
  check_tape(log_sigma, "gaussian_log_prob");
  check_tape(z, "gaussian_log_prob");
  const Tensor& mt = val(mu.id);
  const Tensor& st = val(log_sigma.id);
  const Tensor& zt = val(z.id);
  if (mt.size() != st.size() || mt.size() != zt.size())
    throw std::invalid_argument("gaussian_log_prob: mu/log_sigma/z length mismatch (" +
                                shape_str(mt.shape) + ", " + shape_str(st.shape) + ", " +
                                shape_str(zt.shape) + ")");
  double lp = 0.0;
  for (std::size_t i = 0; i < mt.size(); ++i) {
    double r = zt[i] - mt[i];
    double inv_var = std::exp(-2.0 * st[i]);
    lp += -0.5 * kLogTwoPi - st[i] - 0.5 * inv_var * r * r;
  }
  int mid = mu.id, sid = log_sigma.id, zid = z.id;
  int id = push("gaussian_log_prob", Tensor::scalar(lp), {mid, sid, zid},
                [mid, sid, zid](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    double g = n.grad[0];
    const Tensor& mt2 = t.val(mid);
    const Tensor& st2 = t.val(sid);
    const Tensor& zt2 = t.val(zid);
    bool nm = t.wants_grad(mid), ns = t.wants_grad(sid), nz = t.wants_grad(zid);
    Tensor* gm = nm ? &t.grad_buf(mid) : nullptr;
    Tensor* gs = ns ? &t.grad_buf(sid) : nullptr;
    Tensor* gz = nz ? &t.grad_buf(zid) : nullptr;
    for (std::size_t i = 0; i < mt2.size(); ++i) {
      double r = zt2[i] - mt2[i];
      double inv_var = std::exp(-2.0 * st2[i]);
      if (gm) gm->data[i] += g * inv_var * r;
      if (gs) gs->data[i] += g * (inv_var * r * r - 1.0);
      if (gz) gz->data[i] -= g * inv_var * r;
    }
  });
  return {this, id};
}

Value Tape::bernoulli_log_prob(Value logits, const Tensor& y) {
  check_tape(logits, "bernoulli_log_prob");
  const Tensor& lt = val(logits.id);
  if (lt.size() != y.size())
    throw std::invalid_argument("bernoulli_log_prob: logits/label length mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    double sign = 1.0 - 2.0 * y[i];  // y=1 -> -1, y=0 -> +1
    lp -= softplus_stable(sign * lt[i]);
  }
  int lid = logits.id;
  Tensor yc = y;
  int id = push("bernoulli_log_prob", Tensor::scalar(lp), {lid},
                [lid, yc = std::move(yc)](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    if (!t.wants_grad(lid)) return;
    double g = n.grad[0];
    const Tensor& lt2 = t.val(lid);
    Tensor& gl = t.grad_buf(lid);
    for (std::size_t i = 0; i < lt2.size(); ++i)
      gl[i] += g * (yc[i] - sigmoid(lt2[i]));
  });
  return {this, id};
}

Value Tape::mean_of(const std::vector<Value>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_of: empty list");
  std::vector<int> parents;
  parents.reserve(xs.size());
  double s = 0.0;
  for (Value v : xs) {
    check_tape(v, "mean_of");
    s += val(v.id).value();
    parents.push_back(v.id);
  }
  double inv = 1.0 / static_cast<double>(xs.size());
  std::vector<int> pcopy = parents;
  int id = push("mean_of", Tensor::scalar(s * inv), std::move(parents),
                [pcopy = std::move(pcopy), inv](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    double g = n.grad[0] * inv;
    for (int pid : pcopy) {
      if (!t.wants_grad(pid)) continue;
      t.grad_buf(pid)[0] += g;
    }
  });
  return {this, id};
}

void Tape::backward(Value out) {
  check_tape(out, "backward");
  if (!val(out.id).is_scalar())
    throw std::invalid_argument("backward: output gradient required for non-scalar output");
  backward(out, Tensor::scalar(1.0));
}

void Tape::backward(Value out, const Tensor& out_grad) {
  check_tape(out, "backward");
  if (nodes_.empty()) throw std::logic_error("backward: called before any forward pass");
  if (!out_grad.same_shape(val(out.id)))
    throw std::invalid_argument("backward: output gradient shape mismatch");
  for (Node& n : nodes_) n.grad = Tensor();
  nodes_[static_cast<std::size_t>(out.id)].grad = out_grad;
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.data.empty() || !n.backprop) continue;
    n.backprop(*this, i);
  }
  backward_ran_ = true;
}

const Tensor& Tape::value(Value v) const {
  check_tape(v, "value");
  return nodes_[static_cast<std::size_t>(v.id)].value;
}

const Tensor& Tape::grad(Value v) const {
  check_tape(v, "grad");
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.grad.data.empty() ? empty_ : n.grad;
}

void Tape::grads_into(ParamGraph& pg) const {
  if (!backward_ran_)
    throw std::logic_error("grads_into: backward has not been run on this tape");
  for (const auto& [name, id] : param_ids_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.data.empty()) continue;
    Tensor& g = pg.grad(name);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  }
}

void Tape::clear() {
  nodes_.clear();
  param_ids_.clear();
  backward_ran_ = false;
}

}  // namespace favi::ad
