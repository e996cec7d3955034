#pragma once

#include <functional>

#include "favi/param_graph.hpp"
#include "favi/tape.hpp"

namespace favi {

// Scalar loss builder: records the loss for the current parameter values on
// the given tape. Must be deterministic for the duration of one check.
using LossBuilder = std::function<ad::Value(ad::Tape&, const ParamGraph&)>;

// Compares backward() gradients against central finite differences over every
// parameter coordinate. Returns the max of
//   |analytic - central| / (|analytic| + |central| + eps).
double finite_diff_check(ParamGraph& pg, const LossBuilder& f, double step);

}  // namespace favi
