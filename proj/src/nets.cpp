#include "favi/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace favi {

Tensor glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng,
                      std::vector<std::size_t> shape) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.data) v = rng.uniform(-limit, limit);
  return t;
}

Mlp::Mlp(ParamGraph& pg, std::string prefix, std::vector<std::size_t> widths, Act hidden_act,
         Rng& init, bool zero_last)
    : prefix_(std::move(prefix)), widths_(std::move(widths)), act_(hidden_act) {
  if (widths_.size() < 2) throw std::invalid_argument("mlp: need at least input and output widths");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    std::size_t in = widths_[l], out = widths_[l + 1];
    bool last = l + 2 == widths_.size();
    Tensor w = (zero_last && last) ? Tensor::zeros({out, in})
                                   : glorot_uniform(out, in, init, {out, in});
    pg.add(prefix_ + ".w" + std::to_string(l), std::move(w));
    pg.add(prefix_ + ".b" + std::to_string(l), Tensor::zeros({out}));
  }
}

Mlp::Mlp(std::string prefix, std::vector<std::size_t> widths, Act hidden_act)
    : prefix_(std::move(prefix)), widths_(std::move(widths)), act_(hidden_act) {
  if (widths_.size() < 2) throw std::invalid_argument("mlp: need at least input and output widths");
}

ad::Value Mlp::apply(ad::Tape& t, const ParamGraph& pg, ad::Value x) const {
  ad::Value h = x;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    ad::Value w = t.param(pg, prefix_ + ".w" + std::to_string(l));
    ad::Value b = t.param(pg, prefix_ + ".b" + std::to_string(l));
    h = t.affine(w, h, b);
    bool last = l + 2 == widths_.size();
    if (!last) {
      switch (act_) {
        case Act::kRelu: h = t.relu(h); break;
        case Act::kTanh: h = t.tanh(h); break;
        case Act::kIdentity: break;
      }
    }
  }
  return h;
}

DilatedConvNet::DilatedConvNet(ParamGraph& pg, std::string prefix, std::size_t in_channels,
                               std::size_t channels, std::size_t kernel, std::size_t layers,
                               std::size_t out_dim, Rng& init)
    : prefix_(std::move(prefix)), in_channels_(in_channels), channels_(channels),
      kernel_(kernel), layers_(layers), out_dim_(out_dim) {
  if (layers_ == 0) throw std::invalid_argument("conv net: needs at least one layer");
  for (std::size_t l = 0; l < layers_; ++l) {
    std::size_t cin = l == 0 ? in_channels_ : channels_;
    std::size_t fan_in = cin * kernel_;
    pg.add(prefix_ + ".k" + std::to_string(l),
           glorot_uniform(channels_, fan_in, init, {channels_, cin, kernel_}));
    pg.add(prefix_ + ".kb" + std::to_string(l), Tensor::zeros({channels_}));
  }
  pg.add(prefix_ + ".w_out", glorot_uniform(out_dim_, channels_, init, {out_dim_, channels_}));
  pg.add(prefix_ + ".b_out", Tensor::zeros({out_dim_}));
}

DilatedConvNet::DilatedConvNet(std::string prefix, std::size_t in_channels, std::size_t channels,
                               std::size_t kernel, std::size_t layers, std::size_t out_dim)
    : prefix_(std::move(prefix)), in_channels_(in_channels), channels_(channels),
      kernel_(kernel), layers_(layers), out_dim_(out_dim) {}

ad::Value DilatedConvNet::apply(ad::Tape& t, const ParamGraph& pg, ad::Value input) const {
  const Tensor& in = input.tensor();
  if (in.ndim() != 2 || in.shape[0] != in_channels_)
    throw std::invalid_argument("conv net: input must be [" + std::to_string(in_channels_) + ",T]");
  std::size_t tlen = in.shape[1];
  ad::Value h = input;
  std::size_t dilation = 1;
  for (std::size_t l = 0; l < layers_; ++l) {
    ad::Value k = t.param(pg, prefix_ + ".k" + std::to_string(l));
    ad::Value b = t.param(pg, prefix_ + ".kb" + std::to_string(l));
    h = t.conv1d(h, k, b, dilation);
    h = t.relu(h);
    dilation *= 2;
  }
  ad::Value last = t.col(h, tlen - 1);
  ad::Value w = t.param(pg, prefix_ + ".w_out");
  ad::Value b = t.param(pg, prefix_ + ".b_out");
  return t.affine(w, last, b);
}

std::size_t DilatedConvNet::receptive_field() const {
  return 1 + (kernel_ - 1) * ((1u << layers_) - 1);
}

}  // namespace favi
