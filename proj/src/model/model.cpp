#include "maskvae/model.hpp"

#include <cmath>

#include "maskvae/errors.hpp"

namespace maskvae {

// ------------------------------------------------------------ MaskEncoder

template <typename T>
MaskEncoder<T>::MaskEncoder(std::size_t pixels, std::size_t hidden, std::size_t latent,
                            std::size_t copies)
    : pixels_(pixels), latent_(latent) {
  for (std::size_t k = 0; k < copies; ++k) {
    const std::string p = copies == 1 ? "encoder" : "encoder" + std::to_string(k);
    trunks_.push_back(Trunk{Linear<T>(p + ".fc1", pixels, hidden),
                            Linear<T>(p + ".fc2", hidden, hidden),
                            Linear<T>(p + ".fc3", hidden, hidden),
                            Linear<T>(p + ".mu", hidden, latent),
                            Linear<T>(p + ".logvar", hidden, latent)});
  }
}

template <typename T>
void MaskEncoder<T>::init(Rng& rng) {
  for (auto& t : trunks_) {
    t.fc1.init(rng);
    t.fc2.init(rng);
    t.fc3.init(rng);
    t.mu_head.init(rng);
    t.logvar_head.init(rng);
  }
}

template <typename T>
void MaskEncoder<T>::collect(ParameterList<T>& out) {
  for (auto& t : trunks_) {
    t.fc1.collect(out);
    t.fc2.collect(out);
    t.fc3.collect(out);
    t.mu_head.collect(out);
    t.logvar_head.collect(out);
  }
}

template <typename T>
LatentDistribution<T> MaskEncoder<T>::forward(const Tensor<T>& masks,
                                              std::vector<Cache>* caches) const {
  const std::size_t batch = masks.dim(0), classes = masks.dim(1);
  LatentDistribution<T> out{Tensor<T>({batch, classes, latent_}),
                            Tensor<T>({batch, classes, latent_})};
  if (caches) caches->assign(trunks_.size(), Cache{});
  const bool shared = trunks_.size() == 1;
  for (std::size_t k = 0; k < trunks_.size(); ++k) {
    const Trunk& trunk = trunks_[k];
    Tensor<T> input;
    if (shared) {
      input = masks.reshaped({batch * classes, pixels_});
    } else {
      input = Tensor<T>({batch, pixels_});
      for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(masks.data() + (b * classes + k) * pixels_, pixels_, input.data() + b * pixels_);
      }
    }
    Tensor<T> a1 = relu(trunk.fc1.forward(input));
    Tensor<T> a2 = relu(trunk.fc2.forward(a1));
    Tensor<T> a3 = relu(trunk.fc3.forward(a2));
    const Tensor<T> mu = trunk.mu_head.forward(a3);
    const Tensor<T> logvar = trunk.logvar_head.forward(a3);
    if (shared) {
      out.mu.storage() = mu.storage();
      out.logvar.storage() = logvar.storage();
    } else {
      for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(mu.data() + b * latent_, latent_, out.mu.data() + (b * classes + k) * latent_);
        std::copy_n(logvar.data() + b * latent_, latent_,
                    out.logvar.data() + (b * classes + k) * latent_);
      }
    }
    if (caches) {
      Cache& c = (*caches)[k];
      c.input = std::move(input);
      c.a1 = std::move(a1);
      c.a2 = std::move(a2);
      c.a3 = std::move(a3);
    }
  }
  return out;
}

template <typename T>
void MaskEncoder<T>::backward(const std::vector<Cache>& caches, const Tensor<T>& dmu,
                              const Tensor<T>& dlogvar, std::size_t batch, std::size_t classes) {
  const bool shared = trunks_.size() == 1;
  for (std::size_t k = 0; k < trunks_.size(); ++k) {
    Trunk& trunk = trunks_[k];
    const Cache& c = caches[k];
    Tensor<T> d_mu, d_lv;
    if (shared) {
      d_mu = dmu.reshaped({batch * classes, latent_});
      d_lv = dlogvar.reshaped({batch * classes, latent_});
    } else {
      d_mu = Tensor<T>({batch, latent_});
      d_lv = Tensor<T>({batch, latent_});
      for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(dmu.data() + (b * classes + k) * latent_, latent_, d_mu.data() + b * latent_);
        std::copy_n(dlogvar.data() + (b * classes + k) * latent_, latent_, d_lv.data() + b * latent_);
      }
    }
    Tensor<T> da3 = trunk.mu_head.backward(c.a3, d_mu);
    add_inplace(da3, trunk.logvar_head.backward(c.a3, d_lv));
    const Tensor<T> da2 = trunk.fc3.backward(c.a2, relu_backward(c.a3, da3));
    const Tensor<T> da1 = trunk.fc2.backward(c.a1, relu_backward(c.a2, da2));
    trunk.fc1.backward(c.input, relu_backward(c.a1, da1), false);
  }
}

// ------------------------------------------------------------ FeedForward

template <typename T>
FeedForward<T>::FeedForward(std::size_t dim, std::size_t expansion)
    : fc1_("feed_forward.fc1", dim, dim * expansion), fc2_("feed_forward.fc2", dim * expansion, dim) {}

template <typename T>
void FeedForward<T>::init(Rng& rng) {
  fc1_.init(rng);
  fc2_.init(rng);
}

template <typename T>
void FeedForward<T>::collect(ParameterList<T>& out) {
  fc1_.collect(out);
  fc2_.collect(out);
}

template <typename T>
Tensor<T> FeedForward<T>::forward(const Tensor<T>& x, Cache* cache) const {
  Tensor<T> pre = fc1_.forward(x);
  Tensor<T> hidden = gelu(pre);
  Tensor<T> y = fc2_.forward(hidden);
  if (cache) {
    cache->input = x;
    cache->hidden_pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return y;
}

template <typename T>
Tensor<T> FeedForward<T>::backward(const Cache& cache, const Tensor<T>& dy) {
  const Tensor<T> dh = fc2_.backward(cache.hidden, dy);
  return fc1_.backward(cache.input, gelu_backward(cache.hidden_pre, dh));
}

// ---------------------------------------------------------- ResidualBlock

template <typename T>
ResidualBlock<T>::ResidualBlock(std::string name, std::size_t in_channels,
                                std::size_t out_channels, std::size_t groups)
    : norm1_(name + ".norm1", in_channels, groups),
      conv1_(name + ".conv1", in_channels, out_channels, 3),
      norm2_(name + ".norm2", out_channels, groups),
      conv2_(name + ".conv2", out_channels, out_channels, 3) {
  if (in_channels != out_channels) skip_.emplace(name + ".skip", in_channels, out_channels, 1);
}

template <typename T>
void ResidualBlock<T>::init(Rng& rng) {
  conv1_.init(rng);
  conv2_.init(rng);
  if (skip_) skip_->init(rng);
}

template <typename T>
void ResidualBlock<T>::collect(ParameterList<T>& out) {
  norm1_.collect(out);
  conv1_.collect(out);
  norm2_.collect(out);
  conv2_.collect(out);
  if (skip_) skip_->collect(out);
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, Cache* cache) const {
  typename GroupNorm<T>::Cache g1, g2;
  Tensor<T> n1 = norm1_.forward(x, cache ? &g1 : nullptr);
  Tensor<T> a1 = silu(n1);
  Tensor<T> h1 = conv1_.forward(a1);
  Tensor<T> n2 = norm2_.forward(h1, cache ? &g2 : nullptr);
  Tensor<T> a2 = silu(n2);
  Tensor<T> y = conv2_.forward(a2);
  add_inplace(y, skip_ ? skip_->forward(x) : x);
  if (cache) {
    cache->x = x;
    cache->g1 = std::move(g1);
    cache->g2 = std::move(g2);
    cache->n1 = std::move(n1);
    cache->a1 = std::move(a1);
    cache->h1 = std::move(h1);
    cache->n2 = std::move(n2);
    cache->a2 = std::move(a2);
  }
  return y;
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Cache& c, const Tensor<T>& dy) {
  const Tensor<T> da2 = conv2_.backward(c.a2, dy);
  const Tensor<T> dh1 = norm2_.backward(c.h1, c.g2, silu_backward(c.n2, da2));
  const Tensor<T> da1 = conv1_.backward(c.a1, dh1);
  Tensor<T> dx = norm1_.backward(c.x, c.g1, silu_backward(c.n1, da1));
  add_inplace(dx, skip_ ? skip_->backward(c.x, dy) : dy);
  return dx;
}

// ------------------------------------------------------------ MaskDecoder

namespace {

std::size_t last_width(const ModelConfig& c) {
  const auto widths = c.decoder_widths();
  return static_cast<std::size_t>(widths.empty() ? c.decoder_base_channels : widths.back());
}

}  // namespace

template <typename T>
MaskDecoder<T>::MaskDecoder(const ModelConfig& c)
    : classes_(static_cast<std::size_t>(c.class_count)),
      init_size_(static_cast<std::size_t>(c.decoder_init_size)),
      conv_in_("decoder.conv_in", classes_, static_cast<std::size_t>(c.decoder_base_channels), 3),
      norm_out_("decoder.norm_out", last_width(c), static_cast<std::size_t>(c.groupnorm_groups)),
      conv_out_("decoder.conv_out", last_width(c), classes_, 3) {
  std::size_t width = static_cast<std::size_t>(c.decoder_base_channels);
  const auto widths = c.decoder_widths();
  for (std::size_t k = 0; k < widths.size(); ++k) {
    const auto out = static_cast<std::size_t>(widths[k]);
    blocks_.emplace_back("decoder.stage" + std::to_string(k), width, out,
                         static_cast<std::size_t>(c.groupnorm_groups));
    width = out;
  }
}

template <typename T>
void MaskDecoder<T>::init(Rng& rng) {
  conv_in_.init(rng);
  for (auto& b : blocks_) b.init(rng);
  conv_out_.init(rng);
}

template <typename T>
void MaskDecoder<T>::collect(ParameterList<T>& out) {
  conv_in_.collect(out);
  for (auto& b : blocks_) b.collect(out);
  norm_out_.collect(out);
  conv_out_.collect(out);
}

template <typename T>
Tensor<T> MaskDecoder<T>::forward(const Tensor<T>& codes, Cache* cache) const {
  const std::size_t batch = codes.dim(0);
  if (codes.rank() != 3 || codes.dim(1) != classes_ || codes.dim(2) != init_size_ * init_size_) {
    throw InvalidInput("decoder: expected [B, " + std::to_string(classes_) + ", " +
                       std::to_string(init_size_ * init_size_) + "] codes, got " +
                       shape_string(codes.shape()));
  }
  Tensor<T> input = codes.reshaped({batch, classes_, init_size_, init_size_});
  Tensor<T> h = conv_in_.forward(input);
  if (cache) cache->blocks.assign(blocks_.size(), {});
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    h = blocks_[k].forward(upsample2x(h), cache ? &cache->blocks[k] : nullptr);
  }
  typename GroupNorm<T>::Cache norm_cache;
  Tensor<T> normed = norm_out_.forward(h, cache ? &norm_cache : nullptr);
  Tensor<T> activated = silu(normed);
  Tensor<T> logits = conv_out_.forward(activated);
  if (cache) {
    cache->input = std::move(input);
    cache->last = std::move(h);
    cache->out_norm = std::move(norm_cache);
    cache->normed = std::move(normed);
    cache->activated = std::move(activated);
  }
  return logits;
}

template <typename T>
Tensor<T> MaskDecoder<T>::backward(const Cache& cache, const Tensor<T>& dlogits) {
  const Tensor<T> dact = conv_out_.backward(cache.activated, dlogits);
  Tensor<T> dh = norm_out_.backward(cache.last, cache.out_norm, silu_backward(cache.normed, dact));
  for (std::size_t k = blocks_.size(); k-- > 0;) {
    dh = upsample2x_backward(blocks_[k].backward(cache.blocks[k], dh));
  }
  Tensor<T> dinput = conv_in_.backward(cache.input, dh);
  dinput.reshape({dinput.dim(0), classes_, init_size_ * init_size_});
  return dinput;
}

// ------------------------------------------------------------- BasicModel

namespace {

const ModelConfig& validated(const ModelConfig& c) {
  c.validate();
  return c;
}

}  // namespace

template <typename T>
BasicModel<T>::BasicModel(const ModelConfig& config, std::uint64_t init_seed)
    : config_(validated(config)),
      encoder_(static_cast<std::size_t>(config.mask_size) * config.mask_size,
               static_cast<std::size_t>(config.encoder_hidden),
               static_cast<std::size_t>(config.latent_dim),
               config.per_class_encoders ? static_cast<std::size_t>(config.class_count) : 1),
      lstm_("lstm", static_cast<std::size_t>(config.lstm_layers),
            static_cast<std::size_t>(config.latent_dim),
            static_cast<std::size_t>(config.lstm_hidden()), config.bidirectional),
      feed_forward_(static_cast<std::size_t>(config.latent_dim),
                    static_cast<std::size_t>(config.ff_expansion)),
      decoder_(config) {
  Rng rng = make_rng(init_seed, 0x696e6974ULL);
  encoder_.init(rng);
  lstm_.init(rng);
  feed_forward_.init(rng);
  decoder_.init(rng);
}

template <typename T>
Tensor<T> BasicModel<T>::as_planes(const Tensor<T>& masks) const {
  const auto classes = static_cast<std::size_t>(config_.class_count);
  const auto pixels = static_cast<std::size_t>(config_.mask_size) * config_.mask_size;
  const bool ok3 = masks.rank() == 3 && masks.dim(1) == classes && masks.dim(2) == pixels;
  const bool ok4 = masks.rank() == 4 && masks.dim(1) == classes &&
                   masks.dim(2) == static_cast<std::size_t>(config_.mask_size) &&
                   masks.dim(3) == static_cast<std::size_t>(config_.mask_size);
  if ((!ok3 && !ok4) || masks.dim(0) == 0) {
    throw InvalidInput("model expects [B, " + std::to_string(classes) + ", " +
                       std::to_string(pixels) + "] masks, got " + shape_string(masks.shape()));
  }
  return ok3 ? masks : masks.reshaped({masks.dim(0), classes, pixels});
}

template <typename T>
LatentDistribution<T> BasicModel<T>::encode(const Tensor<T>& masks) const {
  return encoder_.forward(as_planes(masks), nullptr);
}

template <typename T>
ClassEmbeddings<T> BasicModel<T>::reparameterize(const LatentDistribution<T>& latent, Mode mode,
                                                 Rng* rng) const {
  ClassEmbeddings<T> out{latent.mu};
  if (mode == Mode::Infer) return out;
  if (!rng) throw InvalidInput("training-mode reparameterization needs an rng");
  NormalSampler normal;
  for (std::size_t i = 0; i < out.codes.size(); ++i) {
    const T eps = static_cast<T>(normal(*rng));
    out.codes[i] += std::exp(latent.logvar[i] * T(0.5)) * eps;
  }
  return out;
}

template <typename T>
ClassEmbeddings<T> BasicModel<T>::lstm_block(const ClassEmbeddings<T>& codes) const {
  if (lstm_.layers() == 0) return codes;
  return ClassEmbeddings<T>{lstm_.forward(codes.codes)};
}

template <typename T>
ClassEmbeddings<T> BasicModel<T>::feed_forward(const ClassEmbeddings<T>& codes) const {
  return ClassEmbeddings<T>{feed_forward_.forward(codes.codes, nullptr)};
}

template <typename T>
Tensor<T> BasicModel<T>::decode(const ClassEmbeddings<T>& codes) const {
  return decoder_.forward(codes.codes, nullptr);
}

template <typename T>
Tensor<T> BasicModel<T>::decode_codes(const ClassEmbeddings<T>& codes) const {
  return decode(feed_forward(lstm_block(codes)));
}

template <typename T>
ForwardOutput<T> BasicModel<T>::forward(const Tensor<T>& masks, Mode mode, Rng* rng) const {
  ForwardOutput<T> out;
  out.latent = encode(masks);
  out.logits = decode_codes(reparameterize(out.latent, mode, rng));
  return out;
}

template <typename T>
ForwardOutput<T> BasicModel<T>::forward_train(const Tensor<T>& masks, Rng& rng,
                                              TrainingTape<T>& tape) {
  const Tensor<T> planes = as_planes(masks);
  tape.batch = planes.dim(0);
  tape.latent = encoder_.forward(planes, &tape.encoder);
  tape.noise = Tensor<T>(tape.latent.mu.shape());
  NormalSampler normal;
  for (auto& v : tape.noise.storage()) v = static_cast<T>(normal(rng));
  Tensor<T> codes = tape.latent.mu;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    codes[i] += std::exp(tape.latent.logvar[i] * T(0.5)) * tape.noise[i];
  }
  if (lstm_.layers() > 0) codes = lstm_.forward(codes, &tape.lstm);
  codes = feed_forward_.forward(codes, &tape.feed_forward);
  ForwardOutput<T> out;
  out.logits = decoder_.forward(codes, &tape.decoder);
  out.latent = tape.latent;
  return out;
}

template <typename T>
void BasicModel<T>::backward(const TrainingTape<T>& tape, const Tensor<T>& dlogits,
                             const Tensor<T>& dmu, const Tensor<T>& dlogvar) {
  Tensor<T> dcodes = decoder_.backward(tape.decoder, dlogits);
  dcodes = feed_forward_.backward(tape.feed_forward, dcodes);
  if (lstm_.layers() > 0) dcodes = lstm_.backward(tape.lstm, dcodes);
  Tensor<T> d_mu = dcodes;
  Tensor<T> d_lv(dcodes.shape());
  for (std::size_t i = 0; i < dcodes.size(); ++i) {
    d_mu[i] += dmu[i];
    d_lv[i] = dcodes[i] * tape.noise[i] * T(0.5) * std::exp(tape.latent.logvar[i] * T(0.5)) +
              dlogvar[i];
  }
  encoder_.backward(tape.encoder, d_mu, d_lv, tape.batch,
                    static_cast<std::size_t>(config_.class_count));
}

template <typename T>
ParameterList<T> BasicModel<T>::parameters() {
  ParameterList<T> out;
  encoder_.collect(out);
  lstm_.collect(out);
  feed_forward_.collect(out);
  decoder_.collect(out);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> BasicModel<T>::parameters() const {
  auto list = const_cast<BasicModel*>(this)->parameters();
  return std::vector<const Parameter<T>*>(list.begin(), list.end());
}

template <typename T>
void BasicModel<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T(0));
}

template <typename T>
std::uint64_t BasicModel<T>::parameter_count() const {
  std::uint64_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

template class MaskEncoder<float>;
template class MaskEncoder<double>;
template class FeedForward<float>;
template class FeedForward<double>;
template class ResidualBlock<float>;
template class ResidualBlock<double>;
template class MaskDecoder<float>;
template class MaskDecoder<double>;
template class BasicModel<float>;
template class BasicModel<double>;

}  // namespace maskvae
