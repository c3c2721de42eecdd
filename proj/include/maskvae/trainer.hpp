#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskvae/checkpoint.hpp"
#include "maskvae/dataset.hpp"
#include "maskvae/metrics.hpp"
#include "maskvae/model.hpp"
#include "maskvae/run_config.hpp"

namespace maskvae {

struct TrainOptions {
  std::filesystem::path run_dir;      // empty: nothing written
  std::filesystem::path resume_from;  // checkpoint to continue
  int stop_after_epoch = 0;           // 0: run config.train.epochs
  std::function<void(const std::string&)> log;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
  ClassWeights class_weights;  // as used by the loss
  DatasetSplit split;
  double wall_seconds = 0.0;
};

Model make_model(const RunConfig& config);

// Throws InvalidInput when the masks do not fit the model config.
void check_dataset(const MaskDataset& data, const ModelConfig& config);

// Minimises wCE + kl_weight * KL with Adam over shuffled mini-batches of the
// training split. Class weights come from the training split only. Writes
// run_dir/epoch_<k>/ checkpoints, metrics.csv and steps.csv when run_dir is
// set. Throws DivergenceError on a non-finite loss.
TrainReport train(Model& model, const MaskDataset& data, const RunConfig& config,
                  const TrainOptions& options = {});

// Inference-mode reconstruction of every mask, with counts summed over the
// whole set.
SegMetrics evaluate(const Model& model, std::span<const LabelMap> masks, int batch_size = 16);
SegMetrics evaluate(const Model& model, const MaskDataset& data, std::span<const std::size_t> indices,
                    int batch_size = 16);

std::vector<LabelMap> reconstruct(const Model& model, std::span<const LabelMap> masks, int batch_size = 16);

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochRecord> epochs,
                       const ClassPalette& palette);
void write_steps_csv(const std::filesystem::path& path, std::span<const StepRecord> steps);
// class_index,class_name,iou (empty IoU for classes absent everywhere).
void write_class_iou_csv(const std::filesystem::path& path, const SegMetrics& metrics,
                         const ClassPalette& palette);

}  // namespace maskvae
