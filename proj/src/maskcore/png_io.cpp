#include "maskvae/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "maskvae/errors.hpp"

namespace maskvae {

namespace {

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void read_callback(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes->size()) {
    png_error(png, "truncated PNG data");
  }
  std::memcpy(out, cursor->bytes->data() + cursor->offset, length);
  cursor->offset += length;
}

void write_callback(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_callback(png_structp) {}

[[noreturn]] void error_callback(png_structp png, png_const_charp message) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = message;
  png_longjmp(png, 1);
}

void warning_callback(png_structp, png_const_charp) {}

}  // namespace

RawImage decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw FormatError("not a PNG file");
  }
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error,
                                           error_callback, warning_callback);
  if (!png) throw FormatError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("png_create_info_struct failed");
  }
  ReadCursor cursor{&bytes, 0};
  RawImage image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decode failed: " + error);
  }
  png_set_read_fn(png, &cursor, read_callback);
  png_read_info(png, info);
  const auto bit_depth = png_get_bit_depth(png, info);
  const auto color_type = png_get_color_type(png, info);
  if (bit_depth != 8 || (color_type & PNG_COLOR_MASK_PALETTE)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("only 8-bit non-palette PNGs are supported (bit depth " +
                      std::to_string(bit_depth) + ")");
  }
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.channels = png_get_channels(png, info);
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * image.channels);
  rows.resize(static_cast<std::size_t>(image.height));
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) rows[y] = image.pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

std::vector<std::uint8_t> encode_png(int height, int width, int channels,
                                     const std::vector<std::uint8_t>& pixels) {
  int color_type = 0;
  switch (channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 2: color_type = PNG_COLOR_TYPE_GRAY_ALPHA; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
    default: throw InvalidInput("unsupported channel count");
  }
  if (pixels.size() != static_cast<std::size_t>(height) * width * channels) {
    throw InvalidInput("pixel buffer does not match image size");
  }
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error,
                                            error_callback, warning_callback);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encode failed: " + error);
  }
  png_set_write_fn(png, &out, write_callback, flush_callback);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(pixels.data() + y * stride);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

RawImage read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

LabelMap decode_label_png(const std::vector<std::uint8_t>& bytes, int class_count) {
  RawImage raw = decode_png(bytes);
  if (raw.channels != 1) {
    throw FormatError("label PNG must be single-channel, got " +
                      std::to_string(raw.channels) + " channels");
  }
  LabelMap out;
  out.height = raw.height;
  out.width = raw.width;
  out.class_count = class_count;
  out.labels = std::move(raw.pixels);
  return out;
}

LabelMap load_label_png(const std::filesystem::path& path, int class_count) {
  try {
    return decode_label_png(read_file(path), class_count);
  } catch (const FormatError& err) {
    throw FormatError(path.string() + ": " + err.what());
  }
}

std::vector<std::uint8_t> encode_label_png(const LabelMap& labels) {
  return encode_png(labels.height, labels.width, 1, labels.labels);
}

void save_label_png(const LabelMap& labels, const std::filesystem::path& path) {
  write_file(path, encode_label_png(labels));
}

std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image) {
  return encode_png(image.height, image.width, 3, image.pixels);
}

void save_rgb_png(const RgbImage& image, const std::filesystem::path& path) {
  write_file(path, encode_rgb_png(image));
}

std::vector<std::uint8_t> load_binary_png(const std::filesystem::path& path, int& height,
                                          int& width) {
  RawImage raw = read_png(path);
  height = raw.height;
  width = raw.width;
  // Alpha does not count as colour.
  const int colour_channels = (raw.channels == 2 || raw.channels == 4) ? raw.channels - 1
                                                                       : raw.channels;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(height) * width, 0);
  for (std::size_t p = 0; p < out.size(); ++p) {
    for (int k = 0; k < colour_channels; ++k) {
      if (raw.pixels[p * raw.channels + k] != 0) {
        out[p] = 1;
        break;
      }
    }
  }
  return out;
}

}  // namespace maskvae
