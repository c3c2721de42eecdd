#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "maskvae/mask.hpp"
#include "maskvae/palette.hpp"

namespace maskvae {

enum class SisLayout { PartFiles, LabelMap };

SisLayout parse_sis_layout(const std::string& name);  // "part-files" | "label-map"

// part-files: one 0/255 grayscale PNG per non-empty foreground class,
// named <image_id>_<class>.png as in CelebAMask-HQ (background is what no
// part covers; an all-background mask gets a background file so its size
// survives). label-map: <image_id>.png with class indices plus
// palette.tsv. Returns the written files.
std::vector<std::filesystem::path> export_sis(const LabelMap& mask, const ClassPalette& palette, SisLayout layout,
                                              const std::filesystem::path& out_dir, const std::string& image_id);

// Reads back what export_sis wrote.
LabelMap import_sis(const std::filesystem::path& dir, const ClassPalette& palette, SisLayout layout,
                    const std::string& image_id);

}  // namespace maskvae
