#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "maskvae/tensor.hpp"

namespace maskvae {

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

// Little-endian blob: magic, count, then (name, shape, float32 data) per
// tensor. Values are stored as float32 whatever the in-memory type.
void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors,
                   std::uint64_t tag = 0);
std::vector<NamedTensor> read_tensors(const std::filesystem::path& path, std::uint64_t* tag = nullptr);

}  // namespace maskvae
