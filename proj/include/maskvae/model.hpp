#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "maskvae/layers.hpp"
#include "maskvae/lstm.hpp"
#include "maskvae/model_config.hpp"
#include "maskvae/random.hpp"
#include "maskvae/tensor.hpp"

namespace maskvae {

enum class Mode { Train, Infer };

// Per-class Gaussian parameters, each [B, C, D].
template <typename T>
struct LatentDistribution {
  Tensor<T> mu;
  Tensor<T> logvar;
};

// Class codes [B, C, D]; row c belongs to palette class c.
template <typename T>
struct ClassEmbeddings {
  Tensor<T> codes;

  std::size_t batch() const { return codes.dim(0); }
  std::size_t classes() const { return codes.dim(1); }
  std::size_t dim() const { return codes.dim(2); }
  std::span<T> row(std::size_t b, std::size_t c) {
    return codes.values().subspan((b * classes() + c) * dim(), dim());
  }
  std::span<const T> row(std::size_t b, std::size_t c) const {
    return codes.values().subspan((b * classes() + c) * dim(), dim());
  }
  bool operator==(const ClassEmbeddings&) const = default;
};

template <typename T>
struct ForwardOutput {
  Tensor<T> logits;  // [B, C, H, W]
  LatentDistribution<T> latent;
};

// Shared three-layer ReLU trunk with mean and log-variance heads. With
// per-class encoders every class gets its own copy.
template <typename T>
class MaskEncoder {
 public:
  struct Cache {
    Tensor<T> input;  // [N, H*W] rows in (b, c) order
    Tensor<T> a1, a2, a3;  // post-ReLU
  };

  MaskEncoder(std::size_t pixels, std::size_t hidden, std::size_t latent, std::size_t copies);
  void init(Rng& rng);
  void collect(ParameterList<T>& out);

  // masks [B, C, P] -> (mu, logvar) [B, C, D]
  LatentDistribution<T> forward(const Tensor<T>& masks, std::vector<Cache>* caches) const;
  void backward(const std::vector<Cache>& caches, const Tensor<T>& dmu, const Tensor<T>& dlogvar,
                std::size_t batch, std::size_t classes);

 private:
  struct Trunk {
    Linear<T> fc1, fc2, fc3, mu_head, logvar_head;
  };
  std::vector<Trunk> trunks_;
  std::size_t pixels_;
  std::size_t latent_;
};

// Two linear layers with GELU in between, applied to every class row.
template <typename T>
class FeedForward {
 public:
  struct Cache {
    Tensor<T> input, hidden_pre;
    Tensor<T> hidden;
  };

  FeedForward(std::size_t dim, std::size_t expansion);
  void init(Rng& rng);
  void collect(ParameterList<T>& out);
  Tensor<T> forward(const Tensor<T>& x, Cache* cache) const;
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy);

 private:
  Linear<T> fc1_, fc2_;
};

// GN -> SiLU -> conv3x3 -> GN -> SiLU -> conv3x3, plus a 1x1 skip when the
// width changes.
template <typename T>
class ResidualBlock {
 public:
  struct Cache {
    Tensor<T> x;
    typename GroupNorm<T>::Cache g1, g2;
    Tensor<T> n1, a1, h1, n2, a2;
  };

  ResidualBlock(std::string name, std::size_t in_channels, std::size_t out_channels,
                std::size_t groups);
  void init(Rng& rng);
  void collect(ParameterList<T>& out);
  Tensor<T> forward(const Tensor<T>& x, Cache* cache) const;
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy);

 private:
  GroupNorm<T> norm1_;
  Conv2d<T> conv1_;
  GroupNorm<T> norm2_;
  Conv2d<T> conv2_;
  std::optional<Conv2d<T>> skip_;
};

// Reshapes each class code to a square map, then conv3x3 -> stages of
// [2x nearest upsample -> residual block] -> GN -> SiLU -> conv3x3 to C
// logits.
template <typename T>
class MaskDecoder {
 public:
  struct Cache {
    Tensor<T> input;  // [B, C, s, s]
    std::vector<typename ResidualBlock<T>::Cache> blocks;
    Tensor<T> last;  // output of the final residual block
    typename GroupNorm<T>::Cache out_norm;
    Tensor<T> normed, activated;
  };

  explicit MaskDecoder(const ModelConfig& config);
  void init(Rng& rng);
  void collect(ParameterList<T>& out);
  Tensor<T> forward(const Tensor<T>& codes, Cache* cache) const;
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dlogits);

 private:
  std::size_t classes_;
  std::size_t init_size_;
  Conv2d<T> conv_in_;
  std::vector<ResidualBlock<T>> blocks_;
  GroupNorm<T> norm_out_;
  Conv2d<T> conv_out_;
};

// Everything one training step needs to run backward.
template <typename T>
struct TrainingTape {
  std::size_t batch = 0;
  std::vector<typename MaskEncoder<T>::Cache> encoder;
  LatentDistribution<T> latent;
  Tensor<T> noise;  // eps of the reparameterization
  typename LstmStack<T>::Cache lstm;
  typename FeedForward<T>::Cache feed_forward;
  typename MaskDecoder<T>::Cache decoder;
};

// Class-wise mask VAE: encoder -> reparameterization -> LSTM block ->
// feed-forward -> convolutional decoder.
template <typename T>
class BasicModel {
 public:
  explicit BasicModel(const ModelConfig& config, std::uint64_t init_seed = 0);

  const ModelConfig& config() const { return config_; }

  // masks: [B, C, H*W] or [B, C, H, W] one-hot planes.
  LatentDistribution<T> encode(const Tensor<T>& masks) const;
  // Train: mu + exp(logvar / 2) * eps with eps ~ N(0, 1); Infer: mu.
  ClassEmbeddings<T> reparameterize(const LatentDistribution<T>& latent, Mode mode,
                                    Rng* rng) const;
  ClassEmbeddings<T> lstm_block(const ClassEmbeddings<T>& codes) const;
  ClassEmbeddings<T> feed_forward(const ClassEmbeddings<T>& codes) const;
  Tensor<T> decode(const ClassEmbeddings<T>& codes) const;
  // lstm_block -> feed_forward -> decode, starting from pre-LSTM codes.
  Tensor<T> decode_codes(const ClassEmbeddings<T>& codes) const;
  ForwardOutput<T> forward(const Tensor<T>& masks, Mode mode, Rng* rng = nullptr) const;

  // Training-mode forward that records the tape for backward.
  ForwardOutput<T> forward_train(const Tensor<T>& masks, Rng& rng, TrainingTape<T>& tape);
  // Accumulates parameter gradients given dL/dlogits and the direct
  // dL/dmu, dL/dlogvar (from the KL term).
  void backward(const TrainingTape<T>& tape, const Tensor<T>& dlogits, const Tensor<T>& dmu,
                const Tensor<T>& dlogvar);

  ParameterList<T> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  void zero_grad();
  std::uint64_t parameter_count() const;

 private:
  Tensor<T> as_planes(const Tensor<T>& masks) const;

  ModelConfig config_;
  MaskEncoder<T> encoder_;
  LstmStack<T> lstm_;
  FeedForward<T> feed_forward_;
  MaskDecoder<T> decoder_;
};

using Model = BasicModel<float>;

}  // namespace maskvae
