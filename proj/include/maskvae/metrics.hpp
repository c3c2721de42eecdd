#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "maskvae/mask.hpp"

namespace maskvae {

struct SegMetrics {
  double pixel_accuracy = 0.0;
  std::vector<std::optional<double>> per_class_iou;  // nullopt: empty union
  double mean_iou = 0.0;
};

// Rows are ground truth, columns prediction. Accumulates over any number of
// images; metrics are computed from the summed counts.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int class_count);

  void add(const LabelMap& pred, const LabelMap& gt);
  void merge(const ConfusionMatrix& other);

  int class_count() const { return class_count_; }
  std::uint64_t count(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * class_count_ + pred];
  }
  std::uint64_t total() const { return total_; }

  SegMetrics metrics() const;

 private:
  int class_count_;
  std::uint64_t total_ = 0;
  std::vector<std::uint64_t> counts_;
};

// Per-image metrics; classes absent from both maps are left out of the mean.
SegMetrics segmentation_metrics(const LabelMap& pred, const LabelMap& gt, int class_count);

}  // namespace maskvae
