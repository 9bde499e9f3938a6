#pragma once

#include <map>
#include <string>

#include "vut/tensor.hpp"

namespace vut {

// Flat container persisted to disk: an embedded UTF-8 config blob plus named
// tensors, written sorted by name.
//
// Layout (little-endian): magic "VUTCKPT1" | u64 config_len | config bytes |
// u64 entry_count | per entry: u64 name_len, name bytes, u8 dtype
// (0=real32, 1=real64), u64 rank, u64 dims[rank], raw row-major values.
struct Checkpoint {
  std::string config_text;
  std::map<std::string, Tensor> entries;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vut
