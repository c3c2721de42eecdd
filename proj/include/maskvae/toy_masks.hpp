#pragma once

#include <cstdint>

#include "maskvae/mask.hpp"
#include "maskvae/palette.hpp"

namespace maskvae {

struct ToyMaskConfig {
  int class_count = 6;
  int height = 64;
  int width = 64;
};

// Synthetic face-like layout: elliptical skin, two eyes inside it, a nose
// centred between the eyes, a mouth below the nose and, depending on C, a
// hair band, brows and neck. Classes follow toy_palette(C). Deterministic in
// seed. Requires 4 <= C <= 8 and H, W >= 32.
LabelMap generate_toy_labels(std::uint64_t seed, const ToyMaskConfig& config);
SemanticMask generate_toy_mask(std::uint64_t seed, const ToyMaskConfig& config);

}  // namespace maskvae
