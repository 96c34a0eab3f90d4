#pragma once

#include <vector>

#include "xdet/tensor.hpp"

namespace xdet {

// Momentum SGD: v <- mu*v + g; p <- p - lr*v. Gradients are zeroed after the
// step. Velocity buffers are indexed parallel to the parameter list.
struct SgdState {
  real lr = real(0.05);
  real momentum = real(0.9);
  std::vector<std::vector<real>> velocity;
};

void sgd_step(std::vector<Tensor>& params, SgdState& state);

}  // namespace xdet
