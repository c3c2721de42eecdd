#include "maskvae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>

#include "maskvae/errors.hpp"
#include "maskvae/png_io.hpp"
#include "maskvae/random.hpp"

namespace fs = std::filesystem;

namespace maskvae {

LabelMap ingest_partwise(const PartImages& parts, const ClassPalette& palette) {
  if (parts.height <= 0 || parts.width <= 0) throw InvalidInput("part images have no size");
  LabelMap out(parts.height, parts.width, palette.size());
  const std::size_t plane = out.pixel_count();
  std::vector<std::pair<int, const std::vector<std::uint8_t>*>> ordered;
  for (const auto& [name, image] : parts.parts) {
    const auto idx = palette.find(name);
    if (!idx) throw InvalidInput("unknown part name '" + name + "'");
    if (image.size() != plane) {
      throw InvalidInput("part '" + name + "' does not match the mask size");
    }
    ordered.emplace_back(*idx, &image);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [idx, image] : ordered) {
    for (std::size_t p = 0; p < plane; ++p) {
      if ((*image)[p]) out.labels[p] = static_cast<std::uint8_t>(idx);
    }
  }
  return out;
}

PartImages decompose_parts(const LabelMap& labels, const ClassPalette& palette) {
  labels.validate();
  if (palette.size() < labels.class_count) throw InvalidInput("palette too small");
  PartImages out{labels.height, labels.width, {}};
  for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
    auto& img = out.parts[palette[labels.labels[p]].name];
    if (img.empty()) img.assign(labels.pixel_count(), 0);
    img[p] = 1;
  }
  return out;
}

std::map<std::string, std::map<std::string, fs::path>> scan_part_directory(const fs::path& root) {
  if (!fs::is_directory(root)) throw InvalidInput("not a directory: " + root.string());
  static const std::regex kName(R"(^([0-9A-Za-z]+)_(.+)\.png$)");
  std::map<std::string, std::map<std::string, fs::path>> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, kName)) continue;
    out[m[1].str()][m[2].str()] = entry.path();
  }
  return out;
}

LabelMap ingest_part_files(const std::map<std::string, fs::path>& files,
                           const ClassPalette& palette, int target_size) {
  PartImages parts;
  for (const auto& [name, path] : files) {
    int h = 0, w = 0;
    auto image = load_binary_png(path, h, w);
    if (parts.parts.empty()) {
      parts.height = h;
      parts.width = w;
    } else if (h != parts.height || w != parts.width) {
      throw InvalidInput("part " + path.string() + " has a different size");
    }
    parts.parts.emplace(name, std::move(image));
  }
  LabelMap merged = ingest_partwise(parts, palette);
  if (target_size > 0 && (merged.height != target_size || merged.width != target_size)) {
    merged = resize_nearest(merged, target_size, target_size);
  }
  return merged;
}

CoverageAccumulator::CoverageAccumulator(int class_count)
    : class_count_(class_count), counts_(static_cast<std::size_t>(class_count), 0) {
  if (class_count <= 0) throw InvalidInput("class count must be positive");
}

void CoverageAccumulator::add(const LabelMap& labels) {
  if (labels.class_count != class_count_) throw InvalidInput("class count mismatch");
  if (samples_ == 0) {
    height_ = labels.height;
    width_ = labels.width;
  } else if (labels.height != height_ || labels.width != width_) {
    throw InvalidInput("masks in a dataset must share H and W");
  }
  for (auto label : labels.labels) {
    if (label >= class_count_) throw InvalidInput("label out of range");
    ++counts_[label];
  }
  pixels_ += labels.pixel_count();
  ++samples_;
}

void CoverageAccumulator::add(const SemanticMask& mask) {
  if (mask.class_count != class_count_) throw InvalidInput("class count mismatch");
  if (samples_ == 0) {
    height_ = mask.height;
    width_ = mask.width;
  } else if (mask.height != height_ || mask.width != width_) {
    throw InvalidInput("masks in a dataset must share H and W");
  }
  for (int c = 0; c < class_count_; ++c) {
    for (auto v : mask.channel(c)) counts_[c] += v;
  }
  pixels_ += mask.plane_size();
  ++samples_;
}

void CoverageAccumulator::merge(const CoverageAccumulator& other) {
  if (other.class_count_ != class_count_) throw InvalidInput("class count mismatch");
  if (other.samples_ == 0) return;
  if (samples_ != 0 && (other.height_ != height_ || other.width_ != width_)) {
    throw InvalidInput("masks in a dataset must share H and W");
  }
  height_ = other.height_;
  width_ = other.width_;
  for (int c = 0; c < class_count_; ++c) counts_[c] += other.counts_[c];
  pixels_ += other.pixels_;
  samples_ += other.samples_;
}

DatasetStats CoverageAccumulator::finish() const {
  if (samples_ == 0) throw InvalidInput("dataset statistics need at least one mask");
  DatasetStats stats;
  stats.sample_count = samples_;
  stats.per_class_mean_coverage.resize(counts_.size());
  for (std::size_t c = 0; c < counts_.size(); ++c) {
    stats.per_class_mean_coverage[c] =
        static_cast<double>(counts_[c]) / static_cast<double>(pixels_);
  }
  return stats;
}

DatasetStats compute_dataset_stats(std::span<const SemanticMask> masks) {
  if (masks.empty()) throw InvalidInput("dataset statistics need at least one mask");
  CoverageAccumulator acc(masks.front().class_count);
  for (const auto& m : masks) acc.add(m);
  return acc.finish();
}

DatasetStats compute_dataset_stats(std::span<const LabelMap> masks) {
  if (masks.empty()) throw InvalidInput("dataset statistics need at least one mask");
  CoverageAccumulator acc(masks.front().class_count);
  for (const auto& m : masks) acc.add(m);
  return acc.finish();
}

ClassWeights compute_class_weights(const DatasetStats& stats) {
  ClassWeights out;
  out.w.reserve(stats.per_class_mean_coverage.size());
  for (double cov : stats.per_class_mean_coverage) out.w.push_back(1.0 - cov);
  return out;
}

ClassWeights uniform_class_weights(int class_count) {
  return ClassWeights{std::vector<double>(static_cast<std::size_t>(class_count), 1.0)};
}

MaskDataset load_mask_directory(const fs::path& dir) {
  const fs::path palette_path = dir / "palette.tsv";
  if (!fs::exists(palette_path)) {
    throw InvalidInput("missing " + palette_path.string());
  }
  MaskDataset data;
  data.palette = read_palette(palette_path);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    LabelMap m = load_label_png(f, data.palette.size());
    m.validate();
    if (!data.masks.empty() &&
        (m.height != data.masks.front().height || m.width != data.masks.front().width)) {
      throw InvalidInput(f.string() + " differs in size from the rest of the dataset");
    }
    data.names.push_back(f.stem().string());
    data.masks.push_back(std::move(m));
  }
  if (data.masks.empty()) throw InvalidInput("no label PNGs in " + dir.string());
  return data;
}

void save_mask_directory(const MaskDataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  write_palette(data.palette, dir / "palette.tsv");
  for (std::size_t i = 0; i < data.masks.size(); ++i) {
    save_label_png(data.masks[i], dir / (data.names.at(i) + ".png"));
  }
}

DatasetSplit split_indices(std::size_t count, double test_fraction, std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction >= 1.0) {
    throw InvalidInput("test fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, 0x53504c4954ULL);
  shuffle(std::span<std::size_t>(order), rng);
  const auto train_count = static_cast<std::size_t>(
      std::llround(static_cast<double>(count) * (1.0 - test_fraction)));
  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace maskvae
