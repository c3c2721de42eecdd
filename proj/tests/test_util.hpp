#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "maskvae/mask.hpp"
#include "maskvae/metrics.hpp"

namespace testutil {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("maskvae_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Intersection and union by direct membership tests per class, with no
// confusion matrix involved.
inline maskvae::SegMetrics brute_force_metrics(const maskvae::LabelMap& pred,
                                               const maskvae::LabelMap& gt, int classes) {
  maskvae::SegMetrics out;
  out.per_class_iou.resize(static_cast<std::size_t>(classes));
  std::size_t correct = 0;
  for (std::size_t p = 0; p < gt.labels.size(); ++p) correct += pred.labels[p] == gt.labels[p];
  out.pixel_accuracy = static_cast<double>(correct) / static_cast<double>(gt.labels.size());
  double sum = 0;
  int n = 0;
  for (int c = 0; c < classes; ++c) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t p = 0; p < gt.labels.size(); ++p) {
      const bool a = pred.labels[p] == c, b = gt.labels[p] == c;
      inter += a && b;
      uni += a || b;
    }
    if (uni == 0) continue;
    out.per_class_iou[c] = static_cast<double>(inter) / static_cast<double>(uni);
    sum += *out.per_class_iou[c];
    ++n;
  }
  out.mean_iou = n ? sum / n : 0.0;
  return out;
}

}  // namespace testutil
