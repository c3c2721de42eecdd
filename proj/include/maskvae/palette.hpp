#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "maskvae/mask.hpp"

namespace maskvae {

using Rgb = std::array<std::uint8_t, 3>;

struct PaletteEntry {
  int index = 0;
  std::string name;
  Rgb color{};
  bool operator==(const PaletteEntry&) const = default;
};

// Ordered class table. Indices are contiguous from 0 and names unique.
class ClassPalette {
 public:
  ClassPalette() = default;
  explicit ClassPalette(std::vector<PaletteEntry> entries);

  int size() const { return static_cast<int>(entries_.size()); }
  const std::vector<PaletteEntry>& entries() const { return entries_; }
  const PaletteEntry& operator[](int index) const { return entries_.at(index); }

  std::optional<int> find(const std::string& name) const;
  std::optional<int> find(const Rgb& color) const;
  // Name lookup that throws InvalidInput listing the known names.
  int index_of(const std::string& name) const;
  std::vector<std::string> names() const;

  bool operator==(const ClassPalette&) const = default;

 private:
  std::vector<PaletteEntry> entries_;
};

// Text table: index<TAB>name<TAB>#RRGGBB, one row per class.
ClassPalette read_palette(const std::filesystem::path& path);
ClassPalette parse_palette(const std::string& text);
void write_palette(const ClassPalette& palette, const std::filesystem::path& path);
std::string format_palette(const ClassPalette& palette);

std::string format_color(const Rgb& color);
Rgb parse_color(const std::string& text);

// The 19-class CelebAMask-HQ table. Large regions come first so that, under
// highest-index-wins overlap resolution, small parts stay visible.
ClassPalette celebamask_palette();

// Palette used by the synthetic face generator for C in [4, 8].
ClassPalette toy_palette(int class_count);

// Generic palette with evenly spread colours and names class_<i>.
ClassPalette default_palette(int class_count);

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB, row-major
  bool operator==(const RgbImage&) const = default;
};

RgbImage render_color(const LabelMap& labels, const ClassPalette& palette);
// Inverse of render_color. Throws InvalidInput on colours not in the palette.
LabelMap labels_from_color(const RgbImage& image, const ClassPalette& palette);
// Nearest-neighbour downscale so the longest side is at most max_side.
RgbImage downscale_preview(const RgbImage& image, int max_side);

}  // namespace maskvae
