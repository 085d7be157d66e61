#pragma once

#include "wmlab/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace wmlab::nn {

// Versioned binary container for named tensors. Layout, all little-endian:
//   magic "MFCK", version u32, tensor count u32, then per tensor:
//   name length u32, name bytes, rank u32, dims u32 each, float32 data.
// Round-trips are bit-exact.
struct NamedTensor {
    std::string name;
    Tensor tensor;
};

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

// nullptr when the name is absent.
const Tensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

// Byte-level equality of two checkpoint files.
bool checkpoint_files_equal(const std::string& a, const std::string& b);

} // namespace wmlab::nn
