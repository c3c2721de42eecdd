#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "maskvae/trainer.hpp"

namespace maskvae {

struct AblationVariant {
  std::string label;
  int lstm_layers = 3;
  bool bidirectional = true;
  bool weighted_ce = true;
};

// The six reconstruction rows: no LSTM block, 1 and 3 unidirectional LSTMs
// with plain CE, 3 unidirectional with weighted CE, 3 bidirectional with
// plain CE, and the full model.
std::vector<AblationVariant> standard_ablation_variants();

struct AblationRun {
  std::uint64_t seed = 0;
  SegMetrics metrics;
  double final_total = 0.0;
  double seconds = 0.0;
};

struct AblationRow {
  AblationVariant variant;
  std::vector<AblationRun> runs;
  double median_miou = 0.0;
  double median_acc = 0.0;
  std::vector<std::optional<double>> median_class_iou;
};

struct AblationOptions {
  std::filesystem::path run_root;  // empty: no checkpoints
  std::function<void(const std::string&)> log;
};

// Trains every variant once per seed from the base config and evaluates on
// the held-out split (fixed by base.train.split_seed).
std::vector<AblationRow> run_ablation(const MaskDataset& data, const RunConfig& base,
                                      const std::vector<AblationVariant>& variants,
                                      const std::vector<std::uint64_t>& seeds,
                                      const AblationOptions& options = {});

RunConfig apply_variant(RunConfig base, const AblationVariant& variant);

double median(std::vector<double> values);

std::string format_ablation_markdown(const std::vector<AblationRow>& rows);
std::string format_ablation_csv(const std::vector<AblationRow>& rows, const ClassPalette& palette);

}  // namespace maskvae
