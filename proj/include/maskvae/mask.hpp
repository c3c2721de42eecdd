#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maskvae/tensor.hpp"

namespace maskvae {

// Per-pixel class indices, the storage form of a semantic mask.
struct LabelMap {
  int height = 0;
  int width = 0;
  int class_count = 0;
  std::vector<std::uint8_t> labels;  // row-major, height * width

  LabelMap() = default;
  LabelMap(int height, int width, int class_count, std::uint8_t fill = 0);

  std::size_t pixel_count() const { return labels.size(); }
  std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }

  // Throws InvalidInput if any label is >= class_count or sizes disagree.
  void validate() const;

  bool operator==(const LabelMap&) const = default;
};

// C binary channels of H x W, exactly one set per pixel.
struct SemanticMask {
  int class_count = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> channels;  // C * H * W, values in {0, 1}

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::uint8_t at(int c, int y, int x) const {
    return channels[static_cast<std::size_t>(c) * plane_size() +
                    static_cast<std::size_t>(y) * width + x];
  }
  std::span<const std::uint8_t> channel(int c) const {
    return std::span<const std::uint8_t>(channels).subspan(
        static_cast<std::size_t>(c) * plane_size(), plane_size());
  }

  // Checks binary values, one-hot partition, positive dims, H and W
  // multiples of 16. Throws InvalidInput with the first violation.
  void validate() const;
  bool is_valid() const noexcept;

  bool operator==(const SemanticMask&) const = default;
};

SemanticMask one_hot_encode(const LabelMap& labels);

// Argmax over the channel axis of a C x H x W tensor; ties go to the lowest
// class index.
template <typename T>
LabelMap one_hot_decode(const Tensor<T>& scores);

LabelMap one_hot_decode(const SemanticMask& mask);

// One label map per batch element of a [B, C, H, W] score tensor.
template <typename T>
std::vector<LabelMap> decode_batch(const Tensor<T>& scores);

// Writes the one-hot planes of several label maps into a [B, C, H*W] tensor.
template <typename T>
Tensor<T> masks_to_tensor(std::span<const LabelMap> masks);

// Nearest-neighbour resampling; keeps labels exact.
LabelMap resize_nearest(const LabelMap& labels, int height, int width);

}  // namespace maskvae
