#include "maskvae/mask.hpp"

#include <sstream>
#include <tuple>
#include <string>

#include "maskvae/errors.hpp"

namespace maskvae {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    out << (i ? "," : "") << shape[i];
  }
  out << ']';
  return out.str();
}

LabelMap::LabelMap(int h, int w, int c, std::uint8_t fill)
    : height(h), width(w), class_count(c),
      labels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {
  if (h <= 0 || w <= 0 || c <= 0 || c > 256) {
    throw InvalidInput("label map dimensions must be positive and C <= 256");
  }
}

void LabelMap::validate() const {
  if (height <= 0 || width <= 0 || class_count <= 0) {
    throw InvalidInput("label map dimensions must be positive");
  }
  if (labels.size() != static_cast<std::size_t>(height) * width) {
    throw InvalidInput("label buffer does not match height * width");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_count) {
      throw InvalidInput("label " + std::to_string(labels[i]) + " at pixel " +
                         std::to_string(i) + " is out of range for " +
                         std::to_string(class_count) + " classes");
    }
  }
}

void SemanticMask::validate() const {
  if (class_count <= 0 || height <= 0 || width <= 0) {
    throw InvalidInput("mask dimensions must be positive");
  }
  if (height % 16 != 0 || width % 16 != 0) {
    throw InvalidInput("mask height and width must be multiples of 16");
  }
  const std::size_t plane = plane_size();
  if (channels.size() != plane * static_cast<std::size_t>(class_count)) {
    throw InvalidInput("channel buffer does not match C * H * W");
  }
  for (std::size_t p = 0; p < plane; ++p) {
    int ones = 0;
    for (int c = 0; c < class_count; ++c) {
      const auto v = channels[static_cast<std::size_t>(c) * plane + p];
      if (v > 1) throw InvalidInput("mask value is not binary");
      ones += v;
    }
    if (ones != 1) {
      throw InvalidInput("pixel " + std::to_string(p) + " has " +
                         std::to_string(ones) + " active channels");
    }
  }
}

bool SemanticMask::is_valid() const noexcept {
  try {
    validate();
    return true;
  } catch (const InvalidInput&) {
    return false;
  }
}

SemanticMask one_hot_encode(const LabelMap& labels) {
  labels.validate();
  SemanticMask mask;
  mask.class_count = labels.class_count;
  mask.height = labels.height;
  mask.width = labels.width;
  const std::size_t plane = labels.pixel_count();
  mask.channels.assign(plane * static_cast<std::size_t>(labels.class_count), 0);
  for (std::size_t p = 0; p < plane; ++p) {
    mask.channels[labels.labels[p] * plane + p] = 1;
  }
  return mask;
}

namespace {

template <typename T>
void argmax_planes(const T* scores, int classes, std::size_t plane,
                   std::uint8_t* out) {
  for (std::size_t p = 0; p < plane; ++p) {
    int best = 0;
    T best_value = scores[p];
    for (int c = 1; c < classes; ++c) {
      const T v = scores[static_cast<std::size_t>(c) * plane + p];
      if (v > best_value) {
        best_value = v;
        best = c;
      }
    }
    out[p] = static_cast<std::uint8_t>(best);
  }
}

}  // namespace

template <typename T>
LabelMap one_hot_decode(const Tensor<T>& scores) {
  Shape shape = scores.shape();
  if (shape.size() == 4 && shape[0] == 1) shape.erase(shape.begin());
  if (shape.size() != 3 || shape[0] == 0) {
    throw InvalidInput("expected C x H x W scores, got " + shape_string(scores.shape()));
  }
  LabelMap out(static_cast<int>(shape[1]), static_cast<int>(shape[2]),
               static_cast<int>(shape[0]));
  argmax_planes(scores.data(), out.class_count, out.pixel_count(), out.labels.data());
  return out;
}

template <typename T>
std::vector<LabelMap> decode_batch(const Tensor<T>& scores) {
  if (scores.rank() != 4) {
    throw InvalidInput("expected B x C x H x W scores, got " + shape_string(scores.shape()));
  }
  const auto [batch, classes, h, w] =
      std::tuple{scores.dim(0), scores.dim(1), scores.dim(2), scores.dim(3)};
  std::vector<LabelMap> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    LabelMap m(static_cast<int>(h), static_cast<int>(w), static_cast<int>(classes));
    argmax_planes(scores.data() + b * classes * h * w, static_cast<int>(classes),
                  h * w, m.labels.data());
    out.push_back(std::move(m));
  }
  return out;
}

LabelMap one_hot_decode(const SemanticMask& mask) {
  Tensor<std::uint8_t> scores(
      {static_cast<std::size_t>(mask.class_count), static_cast<std::size_t>(mask.height),
       static_cast<std::size_t>(mask.width)},
      mask.channels);
  return one_hot_decode(scores);
}

template <typename T>
Tensor<T> masks_to_tensor(std::span<const LabelMap> masks) {
  if (masks.empty()) throw InvalidInput("no masks to stack");
  const auto& first = masks.front();
  const std::size_t plane = first.pixel_count();
  const auto classes = static_cast<std::size_t>(first.class_count);
  Tensor<T> out({masks.size(), classes, plane});
  for (std::size_t b = 0; b < masks.size(); ++b) {
    const auto& m = masks[b];
    if (m.height != first.height || m.width != first.width ||
        m.class_count != first.class_count) {
      throw InvalidInput("masks in a batch must share C, H and W");
    }
    T* base = out.data() + b * classes * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const auto label = m.labels[p];
      if (label >= classes) throw InvalidInput("label out of range");
      base[label * plane + p] = T(1);
    }
  }
  return out;
}

LabelMap resize_nearest(const LabelMap& labels, int height, int width) {
  LabelMap out(height, width, labels.class_count);
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * labels.height / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>(static_cast<long long>(x) * labels.width / width);
      out.at(y, x) = labels.at(sy, sx);
    }
  }
  return out;
}

template LabelMap one_hot_decode<float>(const Tensor<float>&);
template LabelMap one_hot_decode<double>(const Tensor<double>&);
template LabelMap one_hot_decode<std::uint8_t>(const Tensor<std::uint8_t>&);
template std::vector<LabelMap> decode_batch<float>(const Tensor<float>&);
template std::vector<LabelMap> decode_batch<double>(const Tensor<double>&);
template Tensor<float> masks_to_tensor<float>(std::span<const LabelMap>);
template Tensor<double> masks_to_tensor<double>(std::span<const LabelMap>);

}  // namespace maskvae
