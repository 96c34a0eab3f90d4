#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xdet/tensor.hpp"

namespace xdet {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Binary checkpoint: magic + version header, then name/shape/raw
// little-endian values per parameter, in list order.
void save_checkpoint(const std::string& path, const NamedParams& params);

// Loads values into the given parameters; names and shapes must match the
// file exactly (same order).
void load_checkpoint(const std::string& path, NamedParams& params);

}  // namespace xdet
