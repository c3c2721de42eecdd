#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "maskvae/layers.hpp"

namespace maskvae {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 0.0;  // max global L2 norm; 0 disables
};

template <typename T>
class Adam {
 public:
  Adam(ParameterList<T> params, AdamConfig config);

  // One update from the accumulated gradients. Returns the global gradient
  // norm before clipping.
  double step();
  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

  void save(const std::filesystem::path& path) const;
  // Moments are matched to parameters by name and shape.
  void load(const std::filesystem::path& path);

 private:
  ParameterList<T> params_;
  AdamConfig config_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::uint64_t steps_ = 0;
};

}  // namespace maskvae
