#include "xdet/optim.hpp"

#include <stdexcept>

namespace xdet {

void sgd_step(std::vector<Tensor>& params, SgdState& state) {
  if (state.velocity.empty()) state.velocity.resize(params.size());
  if (state.velocity.size() != params.size())
    throw std::invalid_argument("sgd_step: velocity/parameter count mismatch");

  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Node* p = params[i].node();
    p->ensure_grad();
    auto& v = state.velocity[i];
    if (v.size() != p->size()) v.assign(p->size(), real(0));
    for (std::size_t j = 0; j < p->size(); ++j) {
      v[j] = state.momentum * v[j] + p->grad[j];
      p->value[j] -= state.lr * v[j];
      p->grad[j] = real(0);
    }
  }
}

}  // namespace xdet
