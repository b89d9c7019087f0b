#pragma once

#include <string>

#include "mpcrrl/nn/tensor.hpp"

namespace mpcrrl::nn {

// Checkpoint file: magic line, little-endian u64 manifest length, JSON
// manifest of (name, shape, byte offset), then one flat float64 blob.
// Round trips are bit-exact.
void save_checkpoint(const ParamSet& params, const std::string& path);
ParamSet load_checkpoint(const std::string& path);

// Loads and validates against an expected layout (names and shapes).
ParamSet load_checkpoint_like(const std::string& path, const ParamSet& expected);

}  // namespace mpcrrl::nn
