#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "maskvae/losses.hpp"
#include "maskvae/model_config.hpp"

namespace maskvae {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 16;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;        // model init, shuffling, sampling noise
  std::uint64_t split_seed = 0;  // train/test split
  double train_ratio = 10.0 / 11.0;
  double test_ratio = 1.0 / 11.0;
  double grad_clip = 0.0;  // 0: off
  bool eval_each_epoch = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct RunConfig {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
};

// Key-value text, one `key = value` per line, '#' starts a comment. Keys
// are the field names of ModelConfig, TrainConfig and LossConfig
// (kl_weight, use_weighted_ce). Unknown keys and bad values throw
// ConfigError. Giving only one of train_ratio/test_ratio sets the other.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig read_run_config(const std::filesystem::path& path, RunConfig base = {});
std::string format_run_config(const RunConfig& config);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace maskvae
