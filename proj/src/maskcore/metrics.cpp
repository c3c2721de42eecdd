#include "maskvae/metrics.hpp"

#include "maskvae/errors.hpp"

namespace maskvae {

ConfusionMatrix::ConfusionMatrix(int class_count)
    : class_count_(class_count),
      counts_(static_cast<std::size_t>(class_count) * class_count, 0) {
  if (class_count <= 0) throw InvalidInput("class count must be positive");
}

void ConfusionMatrix::add(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width ||
      pred.labels.size() != gt.labels.size()) {
    throw InvalidInput("prediction and ground truth differ in shape");
  }
  for (std::size_t p = 0; p < gt.labels.size(); ++p) {
    const int g = gt.labels[p];
    const int q = pred.labels[p];
    if (g >= class_count_ || q >= class_count_) throw InvalidInput("label out of range");
    ++counts_[static_cast<std::size_t>(g) * class_count_ + q];
  }
  total_ += gt.labels.size();
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.class_count_ != class_count_) throw InvalidInput("class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
}

SegMetrics ConfusionMatrix::metrics() const {
  SegMetrics out;
  out.per_class_iou.resize(static_cast<std::size_t>(class_count_));
  if (total_ == 0) return out;
  std::uint64_t correct = 0;
  double iou_sum = 0.0;
  int iou_count = 0;
  for (int c = 0; c < class_count_; ++c) {
    const std::uint64_t tp = count(c, c);
    std::uint64_t gt_total = 0, pred_total = 0;
    for (int k = 0; k < class_count_; ++k) {
      gt_total += count(c, k);
      pred_total += count(k, c);
    }
    correct += tp;
    const std::uint64_t uni = gt_total + pred_total - tp;
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    out.per_class_iou[c] = iou;
    iou_sum += iou;
    ++iou_count;
  }
  out.pixel_accuracy = static_cast<double>(correct) / static_cast<double>(total_);
  out.mean_iou = iou_count ? iou_sum / iou_count : 0.0;
  return out;
}

SegMetrics segmentation_metrics(const LabelMap& pred, const LabelMap& gt, int class_count) {
  ConfusionMatrix cm(class_count);
  cm.add(pred, gt);
  return cm.metrics();
}

}  // namespace maskvae
