#include "maskvae/toy_masks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "maskvae/errors.hpp"
#include "maskvae/random.hpp"

namespace maskvae {

namespace {

struct Ellipse {
  double cx, cy, rx, ry;
  bool contains(double x, double y) const {
    const double dx = (x - cx) / rx;
    const double dy = (y - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
  }
};

void paint(LabelMap& out, int label, const std::function<bool(double, double)>& inside) {
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      // Sample at pixel centres in unit coordinates.
      const double u = (x + 0.5) / out.width;
      const double v = (y + 0.5) / out.height;
      if (inside(u, v)) out.at(y, x) = static_cast<std::uint8_t>(label);
    }
  }
}

}  // namespace

LabelMap generate_toy_labels(std::uint64_t seed, const ToyMaskConfig& config) {
  if (config.height < 32 || config.width < 32) {
    throw InvalidInput("toy masks need H and W of at least 32");
  }
  const ClassPalette palette = toy_palette(config.class_count);
  Rng rng = make_rng(seed, 0x746f79ULL);
  auto uni = [&rng](double lo, double hi) { return uniform_real(rng, lo, hi); };

  const Ellipse skin{uni(0.44, 0.56), uni(0.50, 0.58), uni(0.25, 0.31), uni(0.30, 0.36)};
  const double eye_dx = skin.rx * uni(0.36, 0.48);
  const double eye_y = skin.cy - skin.ry * uni(0.12, 0.26);
  const double eye_rx = uni(0.060, 0.085);
  const double eye_ry = uni(0.035, 0.050);
  const double tilt = uni(-0.02, 0.02);
  const Ellipse left_eye{skin.cx - eye_dx, eye_y - tilt, eye_rx, eye_ry};
  const Ellipse right_eye{skin.cx + eye_dx, eye_y + tilt, eye_rx, eye_ry};
  const Ellipse nose{skin.cx + uni(-0.25, 0.25) * eye_dx, eye_y + skin.ry * uni(0.30, 0.40),
                     uni(0.040, 0.060), uni(0.070, 0.100)};
  const double mouth_y =
      std::min(nose.cy + nose.ry + skin.ry * uni(0.15, 0.25), skin.cy + skin.ry * 0.72);
  const Ellipse mouth{skin.cx + uni(-0.02, 0.02), mouth_y, uni(0.10, 0.15), uni(0.030, 0.050)};
  const Ellipse hair{skin.cx, skin.cy - skin.ry * uni(0.10, 0.20), skin.rx * uni(1.12, 1.25),
                     skin.ry * uni(1.05, 1.15)};
  const double hair_limit = skin.cy + skin.ry * uni(-0.1, 0.3);
  const bool has_hair = NormalSampler::uniform(rng) < 0.9;
  const double brow_gap = uni(0.045, 0.07);
  const double brow_rx = eye_rx * uni(1.1, 1.4);
  const double neck_half = skin.rx * uni(0.40, 0.55);

  LabelMap out(config.height, config.width, config.class_count, 0);
  for (const auto& entry : palette.entries()) {
    const int label = entry.index;
    const std::string& name = entry.name;
    if (name == "neck") {
      paint(out, label, [&](double u, double v) {
        return std::abs(u - skin.cx) <= neck_half && v >= skin.cy;
      });
    } else if (name == "hair") {
      if (!has_hair) continue;
      paint(out, label, [&](double u, double v) { return v <= hair_limit && hair.contains(u, v); });
    } else if (name == "skin") {
      paint(out, label, [&](double u, double v) { return skin.contains(u, v); });
    } else if (name == "brows") {
      const Ellipse lb{left_eye.cx, left_eye.cy - brow_gap, brow_rx, 0.018};
      const Ellipse rb{right_eye.cx, right_eye.cy - brow_gap, brow_rx, 0.018};
      paint(out, label, [&](double u, double v) { return lb.contains(u, v) || rb.contains(u, v); });
    } else if (name == "eyes") {
      paint(out, label, [&](double u, double v) {
        return left_eye.contains(u, v) || right_eye.contains(u, v);
      });
    } else if (name == "nose") {
      paint(out, label, [&](double u, double v) { return nose.contains(u, v); });
    } else if (name == "mouth") {
      paint(out, label, [&](double u, double v) { return mouth.contains(u, v); });
    }
  }
  return out;
}

SemanticMask generate_toy_mask(std::uint64_t seed, const ToyMaskConfig& config) {
  return one_hot_encode(generate_toy_labels(seed, config));
}

}  // namespace maskvae
