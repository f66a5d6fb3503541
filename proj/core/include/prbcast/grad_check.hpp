#pragma once

#include <functional>
#include <vector>

#include "prbcast/tape.hpp"

namespace prbcast::ad {

/// A scalar-valued function expressed as a tape program over leaf inputs.
using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares analytic gradients against central finite differences.
///
/// Returns max over all input coordinates of
///   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const ScalarFn& fn, const std::vector<Tensor>& inputs, double eps = 1e-5);

}  // namespace prbcast::ad
