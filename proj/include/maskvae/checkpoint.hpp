#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "maskvae/metrics.hpp"
#include "maskvae/model.hpp"
#include "maskvae/optimizer.hpp"
#include "maskvae/palette.hpp"
#include "maskvae/run_config.hpp"

namespace maskvae {

struct StepRecord {
  int epoch = 0;
  std::uint64_t step = 0;
  double wce = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double wce = 0.0;  // sample-weighted means over the epoch
  double kl = 0.0;
  double total = 0.0;
  std::optional<SegMetrics> eval;  // held-out split
  double seconds = 0.0;
};

// Everything in the JSON sidecar. config.loss.class_weights holds the
// weights the loss actually used.
struct CheckpointMeta {
  RunConfig config;
  ClassPalette palette;
  int epoch = 0;
  std::uint64_t step = 0;
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
};

// Layout: dir/params.bin, dir/config.json and, with an optimizer,
// dir/optimizer.bin.
void save_checkpoint(const std::filesystem::path& dir, const Model& model, const CheckpointMeta& meta,
                     const Adam<float>* optimizer = nullptr);

// Accepts a checkpoint directory or a run directory; for the latter the
// highest epoch_<k> is used. Throws InvalidInput when nothing is found.
std::filesystem::path resolve_checkpoint(const std::filesystem::path& path);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir);

struct Checkpoint {
  std::filesystem::path dir;
  CheckpointMeta meta;
  Model model;
};

// Rebuilds the model from the sidecar config and loads parameters; any
// name or shape disagreement throws MismatchError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies parameters from a blob into an existing model, checking names and
// shapes.
void load_parameters(Model& model, const std::filesystem::path& params_file);

std::filesystem::path epoch_directory(const std::filesystem::path& run_dir, int epoch);

nlohmann::json metrics_to_json(const SegMetrics& m);
SegMetrics metrics_from_json(const nlohmann::json& j);

}  // namespace maskvae
