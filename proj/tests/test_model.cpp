#include <cmath>
#include <set>

#include "doctest.h"
#include "grad_check.hpp"
#include "maskvae/errors.hpp"
#include "maskvae/losses.hpp"
#include "maskvae/model.hpp"
#include "maskvae/toy_masks.hpp"

using namespace maskvae;

namespace {

ModelConfig toy_config() {
  ModelConfig c;
  c.class_count = 6;
  c.mask_size = 64;
  c.decoder_base_channels = 32;
  return c;
}

// Small enough for double-precision finite differences.
ModelConfig tiny_config() {
  ModelConfig c;
  c.class_count = 3;
  c.mask_size = 16;
  c.decoder_init_size = 4;
  c.latent_dim = 16;
  c.encoder_hidden = 8;
  c.lstm_layers = 2;
  c.bidirectional = true;
  c.ff_expansion = 2;
  c.decoder_base_channels = 4;
  c.groupnorm_groups = 2;
  return c;
}

template <typename T>
Tensor<T> random_masks(const ModelConfig& c, std::size_t batch, std::uint64_t seed) {
  std::vector<LabelMap> maps;
  Rng rng = make_rng(seed);
  for (std::size_t b = 0; b < batch; ++b) {
    LabelMap m(c.mask_size, c.mask_size, c.class_count);
    // Blocky random labels so every class has some area.
    for (int y = 0; y < c.mask_size; ++y) {
      for (int x = 0; x < c.mask_size; ++x) {
        m.at(y, x) = static_cast<std::uint8_t>((x / 4 + y / 4 + static_cast<int>(seed + b)) % c.class_count);
      }
    }
    for (int k = 0; k < 5; ++k) {
      m.labels[uniform_index(rng, m.pixel_count())] =
          static_cast<std::uint8_t>(uniform_index(rng, c.class_count));
    }
    maps.push_back(std::move(m));
  }
  return masks_to_tensor<T>(maps);
}

template <typename T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Tensor<T> t(std::move(shape));
  Rng rng = make_rng(seed);
  NormalSampler normal;
  for (auto& v : t.storage()) v = static_cast<T>(scale * normal(rng));
  return t;
}

bool rows_equal(const Tensor<float>& a, const Tensor<float>& b, std::size_t row, std::size_t width) {
  for (std::size_t i = 0; i < width; ++i) {
    if (a[row * width + i] != b[row * width + i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config validation and derived quantities") {
  ModelConfig paper;
  paper.validate();
  CHECK(paper.upsample_stages() == 4);
  CHECK(paper.decoder_widths() == std::vector<int>{128, 128, 64, 32});
  CHECK(paper.lstm_hidden() == 128);
  paper.bidirectional = false;
  CHECK(paper.lstm_hidden() == 256);

  auto toy = toy_config();
  toy.validate();
  CHECK(toy.upsample_stages() == 2);

  ModelConfig bad = toy_config();
  bad.latent_dim = 128;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = toy_config();
  bad.mask_size = 48;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = toy_config();
  bad.lstm_hidden_per_direction = 100;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = toy_config();
  bad.decoder_base_channels = 12;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  nlohmann::json j = toy;
  CHECK(j.get<ModelConfig>() == toy);
}

TEST_CASE("parameter count equals the sum over declared parameter shapes") {
  std::vector<ModelConfig> configs{toy_config(), tiny_config()};
  auto uni = toy_config();
  uni.bidirectional = false;
  configs.push_back(uni);
  auto none = toy_config();
  none.lstm_layers = 0;
  configs.push_back(none);
  auto per_class = tiny_config();
  per_class.per_class_encoders = true;
  configs.push_back(per_class);
  auto wide = tiny_config();
  wide.mask_size = 32;
  configs.push_back(wide);
  for (const auto& c : configs) {
    const Model model(c);
    std::uint64_t enumerated = 0;
    std::set<std::string> names;
    for (const auto* p : model.parameters()) {
      enumerated += p->value.size();
      CHECK(names.insert(p->name).second);
    }
    CHECK(parameter_count(c) == enumerated);
    CHECK(model.parameter_count() == enumerated);
  }
  auto more_ff = toy_config();
  more_ff.ff_expansion = 8;
  CHECK(parameter_count(more_ff) > parameter_count(toy_config()));
  auto one = toy_config();
  one.lstm_layers = 1;
  CHECK(parameter_count(toy_config()) > parameter_count(one));
}

TEST_CASE("paper-scale shapes: 19 classes at 256x256") {
  ModelConfig c;
  c.class_count = 19;
  const Model model(c, 1);
  const auto labels = generate_toy_labels(3, {6, 256, 256});
  LabelMap as19(256, 256, 19);
  as19.labels = labels.labels;
  const std::vector<LabelMap> one{as19};
  const auto latent = model.encode(masks_to_tensor<float>(one));
  CHECK(latent.mu.shape() == Shape{1, 19, 256});
  CHECK(latent.logvar.shape() == Shape{1, 19, 256});
  const auto logits = model.decode(ClassEmbeddings<float>{latent.mu});
  CHECK(logits.shape() == Shape{1, 19, 256, 256});
  CHECK(all_finite(logits));
}

TEST_CASE("encoder is deterministic and independent per class") {
  for (bool per_class : {false, true}) {
    auto c = toy_config();
    c.per_class_encoders = per_class;
    const Model model(c, 5);
    Tensor<float> masks = random_masks<float>(c, 1, 3);
    const auto a = model.encode(masks);
    const auto b = model.encode(masks);
    CHECK(a.mu == b.mu);
    CHECK(a.logvar == b.logvar);

    // Flip pixels of channel 2 only (the encoder sees channels separately).
    Tensor<float> changed = masks;
    const std::size_t plane = 64 * 64;
    for (std::size_t p = 0; p < plane; p += 7) changed[2 * plane + p] = 1.0f - changed[2 * plane + p];
    const auto d = model.encode(changed);
    for (std::size_t row = 0; row < 6; ++row) {
      const bool same = rows_equal(a.mu, d.mu, row, 256) && rows_equal(a.logvar, d.logvar, row, 256);
      CHECK(same == (row != 2));
    }
  }
}

TEST_CASE("encode rejects mismatched shapes") {
  const Model model(toy_config());
  CHECK_THROWS_AS(model.encode(Tensor<float>({1, 5, 64 * 64})), InvalidInput);
  CHECK_THROWS_AS(model.encode(Tensor<float>({1, 6, 32 * 32})), InvalidInput);
}

TEST_CASE("reparameterization modes") {
  const Model model(toy_config());
  LatentDistribution<float> latent{random_tensor<float>({2, 6, 256}, 1),
                                   Tensor<float>({2, 6, 256}, -60.0f)};
  const auto inferred = model.reparameterize(latent, Mode::Infer, nullptr);
  CHECK(inferred.codes == latent.mu);
  Rng rng = make_rng(3);
  const auto sampled = model.reparameterize(latent, Mode::Train, &rng);
  for (std::size_t i = 0; i < sampled.codes.size(); ++i) {
    CHECK(std::abs(sampled.codes[i] - latent.mu[i]) < 1e-9);
  }
  latent.logvar.fill(0.0f);
  Rng r1 = make_rng(9), r2 = make_rng(9);
  CHECK(model.reparameterize(latent, Mode::Train, &r1) == model.reparameterize(latent, Mode::Train, &r2));
  CHECK_THROWS_AS(model.reparameterize(latent, Mode::Train, nullptr), InvalidInput);
}

TEST_CASE("lstm block shape, identity ablation and directionality") {
  const auto codes = ClassEmbeddings<float>{random_tensor<float>({1, 6, 256}, 4)};
  auto changed = codes;
  const std::size_t j = 3;
  for (auto& v : changed.row(0, j)) v += 0.5f;

  auto none = toy_config();
  none.lstm_layers = 0;
  CHECK(Model(none).lstm_block(codes) == codes);

  const Model bidir(toy_config(), 2);
  const auto a = bidir.lstm_block(codes);
  CHECK(a.codes.shape() == Shape{1, 6, 256});
  CHECK(all_finite(a.codes));
  const auto b = bidir.lstm_block(changed);
  for (std::size_t row = 0; row < 6; ++row) CHECK_FALSE(rows_equal(a.codes, b.codes, row, 256));

  auto uni_cfg = toy_config();
  uni_cfg.bidirectional = false;
  const Model uni(uni_cfg, 2);
  const auto ua = uni.lstm_block(codes);
  const auto ub = uni.lstm_block(changed);
  for (std::size_t row = 0; row < 6; ++row) {
    CHECK(rows_equal(ua.codes, ub.codes, row, 256) == (row < j));
  }
}

TEST_CASE("feed-forward preserves shape and maps zero rows to the bias path") {
  const Model model(toy_config(), 8);
  for (std::size_t classes : {1u, 6u}) {
    const auto y = model.feed_forward(ClassEmbeddings<float>{random_tensor<float>({2, classes, 256}, 5)});
    CHECK(y.codes.shape() == Shape{2, classes, 256});
  }
  const auto zero = model.feed_forward(ClassEmbeddings<float>{Tensor<float>({1, 6, 256})});
  // Expected row: fc2.W gelu(fc1.b) + fc2.b from the raw parameters.
  const Parameter<float>* b1 = nullptr;
  const Parameter<float>* w2 = nullptr;
  const Parameter<float>* b2 = nullptr;
  for (const auto* p : model.parameters()) {
    if (p->name == "feed_forward.fc1.bias") b1 = p;
    if (p->name == "feed_forward.fc2.weight") w2 = p;
    if (p->name == "feed_forward.fc2.bias") b2 = p;
  }
  REQUIRE(b1);
  REQUIRE(w2);
  REQUIRE(b2);
  for (std::size_t o = 0; o < 256; ++o) {
    double acc = b2->value[o];
    for (std::size_t h = 0; h < 1024; ++h) {
      const double x = b1->value[h];
      acc += w2->value[o * 1024 + h] * 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
    }
    for (std::size_t row = 0; row < 6; ++row) CHECK(zero.codes[row * 256 + o] == doctest::Approx(acc).epsilon(1e-4));
  }
  for (std::uint64_t s = 0; s < 20; ++s) {
    CHECK(all_finite(model.feed_forward(ClassEmbeddings<float>{random_tensor<float>({1, 6, 256}, s, 10.0)}).codes));
  }
}

TEST_CASE("decoder output shape, softmax normalisation and batch independence") {
  const Model model(toy_config(), 4);
  const auto codes = ClassEmbeddings<float>{random_tensor<float>({3, 6, 256}, 6)};
  const auto logits = model.decode(codes);
  CHECK(logits.shape() == Shape{3, 6, 64, 64});
  const std::size_t plane = 64 * 64;
  for (std::size_t p = 0; p < plane; p += 37) {
    double mx = -1e30, z = 0.0;
    for (std::size_t c = 0; c < 6; ++c) mx = std::max(mx, static_cast<double>(logits[c * plane + p]));
    for (std::size_t c = 0; c < 6; ++c) z += std::exp(logits[c * plane + p] - mx);
    double total = 0.0;
    for (std::size_t c = 0; c < 6; ++c) total += std::exp(logits[c * plane + p] - mx) / z;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (std::size_t b = 0; b < 3; ++b) {
    Tensor<float> single({1, 6, 256});
    std::copy_n(codes.codes.data() + b * 6 * 256, 6 * 256, single.data());
    const auto alone = model.decode(ClassEmbeddings<float>{single});
    double worst = 0.0;
    for (std::size_t i = 0; i < alone.size(); ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(alone[i] - logits[b * alone.size() + i])));
    }
    CHECK(worst < 1e-6);
  }
  CHECK_THROWS_AS(model.decode(ClassEmbeddings<float>{Tensor<float>({1, 5, 256})}), InvalidInput);
}

TEST_CASE("forward is deterministic in inference mode and finite for random weights") {
  const auto c = toy_config();
  const Model model(c, 10);
  const auto masks = random_masks<float>(c, 2, 1);
  const auto a = model.forward(masks, Mode::Infer);
  const auto b = model.forward(masks, Mode::Infer);
  CHECK(a.logits == b.logits);
  CHECK(a.logits.shape() == Shape{2, 6, 64, 64});

  auto small = tiny_config();
  small.mask_size = 32;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Model m(small, seed);
    Rng rng = make_rng(seed);
    const auto out = m.forward(random_masks<float>(small, 1, seed), Mode::Train, &rng);
    REQUIRE(all_finite(out.logits));
    REQUIRE(all_finite(out.latent.mu));
  }
}

TEST_CASE("forward_train matches forward in train mode with the same noise") {
  const auto c = tiny_config();
  Model model(c, 3);
  const auto masks = random_masks<float>(c, 2, 4);
  Rng r1 = make_rng(77), r2 = make_rng(77);
  TrainingTape<float> tape;
  const auto trained = model.forward_train(masks, r1, tape);
  const auto plain = model.forward(masks, Mode::Train, &r2);
  CHECK(trained.logits == plain.logits);
}

TEST_CASE("model gradients match central finite differences") {
  for (bool per_class : {false, true}) {
    for (bool bidirectional : {true, false}) {
      auto c = tiny_config();
      c.per_class_encoders = per_class;
      c.bidirectional = bidirectional;
      BasicModel<double> model(c, 21);
      const auto masks = random_masks<double>(c, 2, 8);
      const auto labels = decode_batch(masks.reshaped({2, 3, 16, 16}));
      LossConfig loss_cfg;
      loss_cfg.kl_weight = 0.25;
      loss_cfg.class_weights = ClassWeights{{0.2, 0.5, 0.9}};

      auto loss = [&]() {
        Rng rng = make_rng(5);
        TrainingTape<double> tape;
        const auto out = model.forward_train(masks, rng, tape);
        return total_loss(out.logits, std::span<const LabelMap>(labels), out.latent, loss_cfg).total;
      };
      model.zero_grad();
      Rng rng = make_rng(5);
      TrainingTape<double> tape;
      const auto out = model.forward_train(masks, rng, tape);
      Tensor<double> dlogits, dmu, dlv;
      total_loss(out.logits, std::span<const LabelMap>(labels), out.latent, loss_cfg, &dlogits, &dmu, &dlv);
      model.backward(tape, dlogits, dmu, dlv);

      const auto result = testutil::check_parameter_gradients(model.parameters(), loss, 4, 99, 1e-4);
      INFO("per_class=" << per_class << " bidirectional=" << bidirectional);
      CHECK(result.probes > 100);
      CHECK(result.max_relative_error < 1e-4);
    }
  }
}
