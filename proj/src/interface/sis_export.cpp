#include "maskvae/sis_export.hpp"

#include <regex>

#include "maskvae/dataset.hpp"
#include "maskvae/errors.hpp"
#include "maskvae/png_io.hpp"

namespace maskvae {

namespace fs = std::filesystem;

SisLayout parse_sis_layout(const std::string& name) {
  if (name == "part-files") return SisLayout::PartFiles;
  if (name == "label-map") return SisLayout::LabelMap;
  throw InvalidInput("unknown layout '" + name + "' (expected part-files or label-map)");
}

namespace {

void check_id(const std::string& image_id) {
  static const std::regex kId("^[0-9A-Za-z]+$");
  if (!std::regex_match(image_id, kId)) {
    throw InvalidInput("image id must be alphanumeric, got '" + image_id + "'");
  }
}

}  // namespace

std::vector<fs::path> export_sis(const LabelMap& mask, const ClassPalette& palette, SisLayout layout,
                                 const fs::path& out_dir, const std::string& image_id) {
  check_id(image_id);
  mask.validate();
  if (palette.size() != mask.class_count) throw InvalidInput("palette does not match the mask class count");
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  if (layout == SisLayout::LabelMap) {
    written.push_back(out_dir / (image_id + ".png"));
    save_label_png(mask, written.back());
    written.push_back(out_dir / "palette.tsv");
    write_palette(palette, written.back());
    return written;
  }
  const auto parts = decompose_parts(mask, palette);
  const bool only_background = parts.parts.size() == 1 && parts.parts.count(palette[0].name);
  for (const auto& [name, bits] : parts.parts) {
    if (name == palette[0].name && !only_background) continue;
    std::vector<std::uint8_t> gray(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) gray[i] = bits[i] ? 255 : 0;
    written.push_back(out_dir / (image_id + "_" + name + ".png"));
    write_file(written.back(), encode_png(mask.height, mask.width, 1, gray));
  }
  return written;
}

LabelMap import_sis(const fs::path& dir, const ClassPalette& palette, SisLayout layout, const std::string& image_id) {
  check_id(image_id);
  if (layout == SisLayout::LabelMap) {
    auto mask = load_label_png(dir / (image_id + ".png"), palette.size());
    mask.validate();
    return mask;
  }
  const auto images = scan_part_directory(dir);
  const auto it = images.find(image_id);
  if (it == images.end()) throw InvalidInput("no part files for image " + image_id + " in " + dir.string());
  return ingest_part_files(it->second, palette);
}

}  // namespace maskvae
