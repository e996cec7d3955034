#pragma once

#include <string>

#include "favi/param_graph.hpp"

namespace favi {

// Binary checkpoint container. Layout (little-endian):
//   magic "FAVC", u32 version (1),
//   u64 descriptor length, descriptor bytes,
//   u64 parameter count, then per parameter:
//     u64 name length, name bytes, u32 ndim, u64 dims..., raw f64 data.
// Round-trips are bit-exact: values are written as raw IEEE-754 bytes.
struct Checkpoint {
  std::string descriptor;
  ParamGraph params;
};

void save_checkpoint(const std::string& path, const std::string& descriptor, const ParamGraph& pg);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace favi
