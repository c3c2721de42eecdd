#pragma once

#include <span>

#include "maskvae/dataset.hpp"
#include "maskvae/mask.hpp"
#include "maskvae/model.hpp"

namespace maskvae {

struct LossConfig {
  double kl_weight = 0.0005;
  bool use_weighted_ce = true;
  ClassWeights class_weights;  // empty: uniform

  // The weights the cross-entropy term actually uses for C classes.
  ClassWeights effective_weights(int class_count) const;
  void validate(int class_count) const;
};

struct LossBreakdown {
  double total = 0.0;
  double wce = 0.0;
  double kl = 0.0;
};

// Mean over all pixels of -w[y] * log softmax(logits)[y]. logits is
// [B, C, H, W] with one ground-truth map per batch element. When grad is
// given it receives dL/dlogits.
template <typename T>
double weighted_cross_entropy(const Tensor<T>& logits, std::span<const LabelMap> gt,
                              const ClassWeights& weights, Tensor<T>* grad = nullptr);

// Single mask, logits [C, H, W].
template <typename T>
double weighted_cross_entropy(const Tensor<T>& logits, const LabelMap& gt,
                              const ClassWeights& weights);

// Mean over batch, classes and dimensions of
// -1/2 (1 + logvar - mu^2 - exp(logvar)).
template <typename T>
double kl_loss(const LatentDistribution<T>& latent, Tensor<T>* dmu = nullptr,
               Tensor<T>* dlogvar = nullptr);

// total = wce + kl_weight * kl. Gradients, when requested, are of total.
template <typename T>
LossBreakdown total_loss(const Tensor<T>& logits, std::span<const LabelMap> gt,
                         const LatentDistribution<T>& latent, const LossConfig& config,
                         Tensor<T>* dlogits = nullptr, Tensor<T>* dmu = nullptr,
                         Tensor<T>* dlogvar = nullptr);

}  // namespace maskvae
