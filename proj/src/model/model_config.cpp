#include "maskvae/model_config.hpp"

#include <string>

#include "maskvae/errors.hpp"

namespace maskvae {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

int ModelConfig::lstm_hidden() const {
  if (lstm_hidden_per_direction > 0) return lstm_hidden_per_direction;
  return bidirectional ? latent_dim / 2 : latent_dim;
}

int ModelConfig::upsample_stages() const {
  int stages = 0;
  for (int s = decoder_init_size; s < mask_size; s *= 2) ++stages;
  return stages;
}

std::vector<int> ModelConfig::decoder_widths() const {
  std::vector<int> widths;
  for (int k = 0; k < upsample_stages(); ++k) {
    widths.push_back(k == 0 ? decoder_base_channels : decoder_base_channels >> (k - 1));
  }
  return widths;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (class_count < 1 || class_count > 256) fail("class_count must be in [1, 256]");
  if (mask_size < 16 || mask_size % 16 != 0) fail("mask_size must be a positive multiple of 16");
  if (decoder_init_size < 1) fail("decoder_init_size must be positive");
  if (latent_dim != decoder_init_size * decoder_init_size) {
    fail("latent_dim must equal decoder_init_size^2 (" +
         std::to_string(decoder_init_size * decoder_init_size) + ")");
  }
  if (mask_size % decoder_init_size != 0 || !is_power_of_two(mask_size / decoder_init_size)) {
    fail("mask_size / decoder_init_size must be a power of two");
  }
  if (encoder_hidden < 1) fail("encoder_hidden must be positive");
  if (lstm_layers < 0) fail("lstm_layers must be non-negative");
  if (lstm_layers > 0 && lstm_hidden() * (bidirectional ? 2 : 1) != latent_dim) {
    fail("LSTM output width must equal latent_dim");
  }
  if (ff_expansion < 1) fail("ff_expansion must be positive");
  if (groupnorm_groups < 1) fail("groupnorm_groups must be positive");
  if (decoder_base_channels < 1 || decoder_base_channels % groupnorm_groups != 0) {
    fail("decoder_base_channels must be a positive multiple of groupnorm_groups");
  }
  for (int w : decoder_widths()) {
    if (w < groupnorm_groups || w % groupnorm_groups != 0) {
      fail("decoder stage width " + std::to_string(w) + " is not divisible by groupnorm_groups");
    }
  }
}

std::uint64_t parameter_count(const ModelConfig& c) {
  c.validate();
  using U = std::uint64_t;
  const U pixels = static_cast<U>(c.mask_size) * c.mask_size;
  const U e = static_cast<U>(c.encoder_hidden);
  const U d = static_cast<U>(c.latent_dim);
  const U classes = static_cast<U>(c.class_count);
  U total = 0;

  const U trunk = (pixels * e + e) + 2 * (e * e + e) + 2 * (e * d + d);
  total += trunk * (c.per_class_encoders ? classes : 1);

  const U h = static_cast<U>(c.lstm_hidden());
  const U dirs = c.bidirectional ? 2 : 1;
  for (int l = 0; l < c.lstm_layers; ++l) {
    const U in = l == 0 ? d : h * dirs;
    total += dirs * (4 * h * in + 4 * h * h + 4 * h);
  }

  const U hidden = d * static_cast<U>(c.ff_expansion);
  total += (d * hidden + hidden) + (hidden * d + d);

  U width = static_cast<U>(c.decoder_base_channels);
  total += width * classes * 9 + width;
  for (int out_i : c.decoder_widths()) {
    const U out = static_cast<U>(out_i);
    total += 2 * width + (out * width * 9 + out) + 2 * out + (out * out * 9 + out);
    if (out != width) total += out * width + out;
    width = out;
  }
  total += 2 * width + (classes * width * 9 + classes);
  return total;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"class_count", c.class_count},
                     {"mask_size", c.mask_size},
                     {"latent_dim", c.latent_dim},
                     {"encoder_hidden", c.encoder_hidden},
                     {"lstm_layers", c.lstm_layers},
                     {"bidirectional", c.bidirectional},
                     {"lstm_hidden_per_direction", c.lstm_hidden_per_direction},
                     {"ff_expansion", c.ff_expansion},
                     {"decoder_base_channels", c.decoder_base_channels},
                     {"groupnorm_groups", c.groupnorm_groups},
                     {"decoder_init_size", c.decoder_init_size},
                     {"per_class_encoders", c.per_class_encoders}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.class_count = j.value("class_count", d.class_count);
  c.mask_size = j.value("mask_size", d.mask_size);
  c.latent_dim = j.value("latent_dim", d.latent_dim);
  c.encoder_hidden = j.value("encoder_hidden", d.encoder_hidden);
  c.lstm_layers = j.value("lstm_layers", d.lstm_layers);
  c.bidirectional = j.value("bidirectional", d.bidirectional);
  c.lstm_hidden_per_direction = j.value("lstm_hidden_per_direction", d.lstm_hidden_per_direction);
  c.ff_expansion = j.value("ff_expansion", d.ff_expansion);
  c.decoder_base_channels = j.value("decoder_base_channels", d.decoder_base_channels);
  c.groupnorm_groups = j.value("groupnorm_groups", d.groupnorm_groups);
  c.decoder_init_size = j.value("decoder_init_size", d.decoder_init_size);
  c.per_class_encoders = j.value("per_class_encoders", d.per_class_encoders);
}

}  // namespace maskvae
