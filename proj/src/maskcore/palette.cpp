#include "maskvae/palette.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "maskvae/errors.hpp"

namespace maskvae {

ClassPalette::ClassPalette(std::vector<PaletteEntry> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw InvalidInput("palette is empty");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].index != static_cast<int>(i)) {
      throw InvalidInput("palette indices must be contiguous from 0");
    }
    if (entries_[i].name.empty() || !seen.insert(entries_[i].name).second) {
      throw InvalidInput("palette names must be unique and non-empty: '" +
                         entries_[i].name + "'");
    }
  }
}

std::optional<int> ClassPalette::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.index;
  }
  return std::nullopt;
}

std::optional<int> ClassPalette::find(const Rgb& color) const {
  for (const auto& e : entries_) {
    if (e.color == color) return e.index;
  }
  return std::nullopt;
}

int ClassPalette::index_of(const std::string& name) const {
  if (auto idx = find(name)) return *idx;
  std::string known;
  for (const auto& e : entries_) known += (known.empty() ? "" : ", ") + e.name;
  throw InvalidInput("unknown class '" + name + "'; known classes: " + known);
}

std::vector<std::string> ClassPalette::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::string format_color(const Rgb& color) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02X%02X%02X", color[0], color[1], color[2]);
  return buf;
}

Rgb parse_color(const std::string& text) {
  if (text.size() != 7 || text[0] != '#') {
    throw FormatError("colour must be #RRGGBB, got '" + text + "'");
  }
  Rgb out{};
  for (int i = 0; i < 3; ++i) {
    const std::string part = text.substr(1 + 2 * i, 2);
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(part, &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != 2) throw FormatError("bad hex colour '" + text + "'");
    out[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

ClassPalette parse_palette(const std::string& text) {
  std::vector<PaletteEntry> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw FormatError("palette line " + std::to_string(line_no) +
                        ": expected index<TAB>name<TAB>#RRGGBB");
    }
    PaletteEntry e;
    try {
      std::size_t used = 0;
      e.index = std::stoi(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("index");
    } catch (const std::exception&) {
      throw FormatError("palette line " + std::to_string(line_no) + ": bad index");
    }
    e.name = fields[1];
    e.color = parse_color(fields[2]);
    entries.push_back(std::move(e));
  }
  try {
    return ClassPalette(std::move(entries));
  } catch (const InvalidInput& err) {
    throw FormatError(std::string("palette: ") + err.what());
  }
}

ClassPalette read_palette(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open palette " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_palette(buf.str());
}

std::string format_palette(const ClassPalette& palette) {
  std::string out;
  for (const auto& e : palette.entries()) {
    out += std::to_string(e.index) + "\t" + e.name + "\t" + format_color(e.color) + "\n";
  }
  return out;
}

void write_palette(const ClassPalette& palette, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write palette " + path.string());
  out << format_palette(palette);
}

namespace {

ClassPalette from_list(const std::vector<std::pair<std::string, Rgb>>& list) {
  std::vector<PaletteEntry> entries;
  for (std::size_t i = 0; i < list.size(); ++i) {
    entries.push_back({static_cast<int>(i), list[i].first, list[i].second});
  }
  return ClassPalette(std::move(entries));
}

}  // namespace

ClassPalette celebamask_palette() {
  return from_list({
      {"background", {0, 0, 0}},
      {"cloth", {0, 255, 0}},
      {"neck", {255, 153, 51}},
      {"neck_l", {0, 0, 153}},
      {"hair", {0, 0, 255}},
      {"hat", {255, 255, 0}},
      {"skin", {204, 0, 0}},
      {"l_ear", {255, 0, 0}},
      {"r_ear", {102, 51, 0}},
      {"ear_r", {0, 255, 255}},
      {"l_brow", {204, 0, 204}},
      {"r_brow", {255, 204, 204}},
      {"eye_g", {204, 204, 0}},
      {"l_eye", {51, 51, 255}},
      {"r_eye", {102, 204, 0}},
      {"nose", {76, 153, 0}},
      {"mouth", {102, 255, 153}},
      {"u_lip", {255, 255, 153}},
      {"l_lip", {0, 51, 0}},
  });
}

ClassPalette toy_palette(int class_count) {
  static const std::vector<std::pair<std::string, Rgb>> kAll = {
      {"background", {0, 0, 0}},  {"neck", {255, 153, 51}}, {"hair", {0, 0, 255}},
      {"skin", {204, 0, 0}},      {"brows", {204, 0, 204}}, {"eyes", {51, 51, 255}},
      {"nose", {76, 153, 0}},     {"mouth", {255, 255, 153}},
  };
  // Which of kAll are present for C = 4..8.
  static const std::vector<std::vector<int>> kSubsets = {
      {0, 3, 5, 6},
      {0, 3, 5, 6, 7},
      {0, 2, 3, 5, 6, 7},
      {0, 2, 3, 4, 5, 6, 7},
      {0, 1, 2, 3, 4, 5, 6, 7},
  };
  if (class_count < 4 || class_count > 8) {
    throw InvalidInput("toy palette supports 4 to 8 classes");
  }
  std::vector<std::pair<std::string, Rgb>> list;
  for (int i : kSubsets[class_count - 4]) list.push_back(kAll[i]);
  return from_list(list);
}

ClassPalette default_palette(int class_count) {
  if (class_count <= 0 || class_count > 256) throw InvalidInput("bad class count");
  std::vector<PaletteEntry> entries;
  for (int i = 0; i < class_count; ++i) {
    // Bit-interleaved colour map: distinct colours for every index < 256.
    int r = 0, g = 0, b = 0, id = i;
    for (int bit = 7; bit >= 0; --bit) {
      r |= ((id >> 0) & 1) << bit;
      g |= ((id >> 1) & 1) << bit;
      b |= ((id >> 2) & 1) << bit;
      id >>= 3;
    }
    entries.push_back({i, i == 0 ? "background" : "class_" + std::to_string(i),
                       Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                           static_cast<std::uint8_t>(b)}});
  }
  return ClassPalette(std::move(entries));
}

RgbImage render_color(const LabelMap& labels, const ClassPalette& palette) {
  if (palette.size() < labels.class_count) {
    throw InvalidInput("palette has " + std::to_string(palette.size()) +
                       " entries but the mask uses " + std::to_string(labels.class_count));
  }
  RgbImage img{labels.height, labels.width,
               std::vector<std::uint8_t>(labels.pixel_count() * 3)};
  for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
    const auto label = labels.labels[p];
    if (label >= palette.size()) throw InvalidInput("label outside palette");
    const auto& c = palette[label].color;
    std::copy(c.begin(), c.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(3 * p));
  }
  return img;
}

LabelMap labels_from_color(const RgbImage& image, const ClassPalette& palette) {
  LabelMap out(image.height, image.width, palette.size());
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    const Rgb c{image.pixels[3 * p], image.pixels[3 * p + 1], image.pixels[3 * p + 2]};
    const auto idx = palette.find(c);
    if (!idx) throw InvalidInput("colour " + format_color(c) + " is not in the palette");
    out.labels[p] = static_cast<std::uint8_t>(*idx);
  }
  return out;
}

RgbImage downscale_preview(const RgbImage& image, int max_side) {
  const int longest = std::max(image.height, image.width);
  if (longest <= max_side) return image;
  const int h = std::max(1, image.height * max_side / longest);
  const int w = std::max(1, image.width * max_side / longest);
  RgbImage out{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w * 3)};
  for (int y = 0; y < h; ++y) {
    const int sy = y * image.height / h;
    for (int x = 0; x < w; ++x) {
      const int sx = x * image.width / w;
      for (int k = 0; k < 3; ++k) {
        out.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + k] =
            image.pixels[(static_cast<std::size_t>(sy) * image.width + sx) * 3 + k];
      }
    }
  }
  return out;
}

}  // namespace maskvae
