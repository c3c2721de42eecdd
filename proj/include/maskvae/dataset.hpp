#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "maskvae/mask.hpp"
#include "maskvae/palette.hpp"

namespace maskvae {

// Binary per-part images keyed by class name, all H x W, values in {0, 1}.
struct PartImages {
  int height = 0;
  int width = 0;
  std::map<std::string, std::vector<std::uint8_t>> parts;
};

// Merges per-part binary images into one mask. Where parts overlap, the
// highest class index wins; uncovered pixels are background (class 0).
LabelMap ingest_partwise(const PartImages& parts, const ClassPalette& palette);

// Splits a label map into one binary image per non-empty class.
PartImages decompose_parts(const LabelMap& labels, const ClassPalette& palette);

// CelebAMask-HQ layout: files named <imageid>_<part>.png anywhere below
// root. Returns image id -> part name -> file.
std::map<std::string, std::map<std::string, std::filesystem::path>> scan_part_directory(
    const std::filesystem::path& root);

// Loads and merges one image's part files, resizing to target_size x
// target_size with nearest-neighbour when it differs (0 keeps the size).
LabelMap ingest_part_files(const std::map<std::string, std::filesystem::path>& files,
                           const ClassPalette& palette, int target_size = 0);

struct DatasetStats {
  std::uint64_t sample_count = 0;
  std::vector<double> per_class_mean_coverage;
};

// Order-independent running sums for DatasetStats; shards can be merged.
class CoverageAccumulator {
 public:
  explicit CoverageAccumulator(int class_count);
  void add(const LabelMap& labels);
  void add(const SemanticMask& mask);
  void merge(const CoverageAccumulator& other);
  DatasetStats finish() const;

 private:
  int class_count_;
  int height_ = 0;
  int width_ = 0;
  std::uint64_t samples_ = 0;
  std::uint64_t pixels_ = 0;
  std::vector<std::uint64_t> counts_;
};

DatasetStats compute_dataset_stats(std::span<const SemanticMask> masks);
DatasetStats compute_dataset_stats(std::span<const LabelMap> masks);

struct ClassWeights {
  std::vector<double> w;
  bool operator==(const ClassWeights&) const = default;
};

// w_c = 1 - mean coverage of class c.
ClassWeights compute_class_weights(const DatasetStats& stats);
ClassWeights uniform_class_weights(int class_count);

// A directory of label PNGs plus palette.tsv.
struct MaskDataset {
  ClassPalette palette;
  std::vector<std::string> names;  // file stems, sorted
  std::vector<LabelMap> masks;
};

MaskDataset load_mask_directory(const std::filesystem::path& dir);
void save_mask_directory(const MaskDataset& data, const std::filesystem::path& dir);

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle, then the first round(n * (1 - test_fraction)) go to train.
DatasetSplit split_indices(std::size_t count, double test_fraction, std::uint64_t seed);

}  // namespace maskvae
