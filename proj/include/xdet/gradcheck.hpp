#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "xdet/tensor.hpp"

namespace xdet {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0;  // worst relative error over all checked entries
  int entries = 0;
  bool ok() const { return max_rel_err < 1e-4; }
};

// Compares tape gradients of forward() against central finite differences
// (eps = 1e-4) for every element of every parameter. forward() must be a
// deterministic pure function of the parameter values; any data-dependent
// selections must be frozen by the caller.
GradCheckResult check_gradients(const std::string& name, const std::vector<Tensor>& params,
                                const std::function<Tensor()>& forward);

// The per-op and per-loss-term suite behind the `gradcheck` subcommand.
// Prints one line per check; returns false if any exceeds the tolerance.
bool run_full_gradcheck(std::ostream& out);

}  // namespace xdet
