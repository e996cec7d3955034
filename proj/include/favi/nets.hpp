#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "favi/param_graph.hpp"
#include "favi/rng.hpp"
#include "favi/tape.hpp"

namespace favi {

enum class Act : std::uint8_t { kRelu, kTanh, kIdentity };

// Fully connected stack. Registers parameters "<prefix>.w<i>" / "<prefix>.b<i>"
// in the owning ParamGraph; weights are Glorot-uniform, biases zero.
class Mlp {
 public:
  // widths = {in, h1, ..., out}. zero_last zero-initializes the output layer.
  Mlp(ParamGraph& pg, std::string prefix, std::vector<std::size_t> widths, Act hidden_act,
      Rng& init, bool zero_last = false);

  // Rebinds to parameters that already exist in a ParamGraph (checkpoint load).
  Mlp(std::string prefix, std::vector<std::size_t> widths, Act hidden_act);

  // x: [in] or [batch,in]; activation on hidden layers only.
  ad::Value apply(ad::Tape& t, const ParamGraph& pg, ad::Value x) const;

  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  const std::vector<std::size_t>& widths() const { return widths_; }

 private:
  std::string prefix_;
  std::vector<std::size_t> widths_;
  Act act_;
};

// Stack of causal dilated 1-D convolutions (kernel width 2 by default,
// dilations 1,2,4,...), ReLU between layers, then a dense readout of the last
// time step. Receptive field = 1 + (kernel-1) * (2^layers - 1).
class DilatedConvNet {
 public:
  DilatedConvNet(ParamGraph& pg, std::string prefix, std::size_t in_channels,
                 std::size_t channels, std::size_t kernel, std::size_t layers,
                 std::size_t out_dim, Rng& init);
  DilatedConvNet(std::string prefix, std::size_t in_channels, std::size_t channels,
                 std::size_t kernel, std::size_t layers, std::size_t out_dim);

  // input: [in_channels, T] -> [out_dim]
  ad::Value apply(ad::Tape& t, const ParamGraph& pg, ad::Value input) const;

  std::size_t receptive_field() const;
  std::size_t out_dim() const { return out_dim_; }

 private:
  std::string prefix_;
  std::size_t in_channels_, channels_, kernel_, layers_, out_dim_;
};

Tensor glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng,
                      std::vector<std::size_t> shape);

}  // namespace favi
