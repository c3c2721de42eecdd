#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "maskvae/mask.hpp"
#include "maskvae/palette.hpp"

namespace maskvae {

// Decoded 8-bit PNG, any channel count (1 gray, 2 gray+alpha, 3 RGB, 4 RGBA).
struct RawImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

RawImage decode_png(const std::vector<std::uint8_t>& bytes);
RawImage read_png(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(int height, int width, int channels,
                                     const std::vector<std::uint8_t>& pixels);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Label PNG: 8-bit single-channel, pixel value = class index. Anything else
// is a FormatError. Range against class_count is checked by the caller via
// LabelMap::validate.
LabelMap decode_label_png(const std::vector<std::uint8_t>& bytes, int class_count);
LabelMap load_label_png(const std::filesystem::path& path, int class_count);
std::vector<std::uint8_t> encode_label_png(const LabelMap& labels);
void save_label_png(const LabelMap& labels, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image);
void save_rgb_png(const RgbImage& image, const std::filesystem::path& path);

// Binary part image (grayscale or colour): a pixel is set when any colour
// channel is non-zero.
std::vector<std::uint8_t> load_binary_png(const std::filesystem::path& path,
                                          int& height, int& width);

}  // namespace maskvae
