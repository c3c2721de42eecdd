#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

namespace maskvae {

// Architecture hyperparameters, including the ablation toggles
// (lstm_layers, bidirectional).
struct ModelConfig {
  int class_count = 19;
  int mask_size = 256;  // H = W
  int latent_dim = 256;
  int encoder_hidden = 256;
  int lstm_layers = 3;
  bool bidirectional = true;
  int lstm_hidden_per_direction = 0;  // 0: latent_dim / 2 if bidirectional, else latent_dim
  int ff_expansion = 4;
  int decoder_base_channels = 128;
  int groupnorm_groups = 8;
  int decoder_init_size = 16;
  bool per_class_encoders = false;

  // Throws ConfigError on any broken invariant: latent_dim equal to
  // decoder_init_size squared, mask_size / decoder_init_size a power of two,
  // LSTM output width equal to latent_dim, decoder widths divisible by the
  // group count.
  void validate() const;

  int lstm_hidden() const;
  int upsample_stages() const;
  // Output channels of each upsampling stage: base, base, base/2, base/4, ...
  std::vector<int> decoder_widths() const;

  bool operator==(const ModelConfig&) const = default;
};

// Closed-form parameter count for a configuration.
std::uint64_t parameter_count(const ModelConfig& config);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace maskvae
