#include "maskvae/losses.hpp"

#include <algorithm>
#include <cmath>

#include "maskvae/errors.hpp"

namespace maskvae {

ClassWeights LossConfig::effective_weights(int class_count) const {
  if (!use_weighted_ce || class_weights.w.empty()) return uniform_class_weights(class_count);
  return class_weights;
}

void LossConfig::validate(int class_count) const {
  if (!(kl_weight >= 0.0) || !std::isfinite(kl_weight)) {
    throw ConfigError("kl_weight must be a finite non-negative number");
  }
  if (!class_weights.w.empty() && static_cast<int>(class_weights.w.size()) != class_count) {
    throw ConfigError("class weights have " + std::to_string(class_weights.w.size()) +
                      " entries for " + std::to_string(class_count) + " classes");
  }
}

template <typename T>
double weighted_cross_entropy(const Tensor<T>& logits, std::span<const LabelMap> gt,
                              const ClassWeights& weights, Tensor<T>* grad) {
  if (logits.rank() != 4 || logits.dim(0) != gt.size()) {
    throw InvalidInput("cross-entropy: expected [B, C, H, W] logits with B label maps, got " +
                       shape_string(logits.shape()));
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  const std::size_t plane = logits.dim(2) * logits.dim(3);
  if (weights.w.size() != classes) throw InvalidInput("cross-entropy: weight count mismatch");
  for (const auto& g : gt) {
    if (g.pixel_count() != plane || static_cast<std::size_t>(g.height) != logits.dim(2)) {
      throw InvalidInput("cross-entropy: label map shape does not match logits");
    }
  }
  if (grad) *grad = Tensor<T>(logits.shape());
  const double n = static_cast<double>(batch * plane);
  double sum = 0.0;
  std::vector<double> scratch(classes);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* base = logits.data() + b * classes * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const std::size_t y = gt[b].labels[p];
      if (y >= classes) throw InvalidInput("cross-entropy: label out of range");
      double mx = base[p];
      for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(base[c * plane + p]));
      double z = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        scratch[c] = std::exp(static_cast<double>(base[c * plane + p]) - mx);
        z += scratch[c];
      }
      const double log_p = static_cast<double>(base[y * plane + p]) - mx - std::log(z);
      const double w = weights.w[y];
      sum -= w * log_p;
      if (grad) {
        T* g = grad->data() + b * classes * plane;
        const double scale = w / n;
        for (std::size_t c = 0; c < classes; ++c) {
          const double prob = scratch[c] / z;
          g[c * plane + p] = static_cast<T>(scale * (prob - (c == y ? 1.0 : 0.0)));
        }
      }
    }
  }
  return sum / n;
}

template <typename T>
double weighted_cross_entropy(const Tensor<T>& logits, const LabelMap& gt,
                              const ClassWeights& weights) {
  if (logits.rank() != 3) throw InvalidInput("cross-entropy: expected [C, H, W] logits");
  const Tensor<T> batched = logits.reshaped({1, logits.dim(0), logits.dim(1), logits.dim(2)});
  return weighted_cross_entropy(batched, std::span<const LabelMap>(&gt, 1), weights);
}

template <typename T>
double kl_loss(const LatentDistribution<T>& latent, Tensor<T>* dmu, Tensor<T>* dlogvar) {
  if (latent.mu.shape() != latent.logvar.shape() || latent.mu.empty()) {
    throw InvalidInput("kl: mu and logvar must be non-empty and share a shape");
  }
  const double n = static_cast<double>(latent.mu.size());
  if (dmu) *dmu = Tensor<T>(latent.mu.shape());
  if (dlogvar) *dlogvar = Tensor<T>(latent.mu.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < latent.mu.size(); ++i) {
    const double mu = latent.mu[i];
    const double lv = latent.logvar[i];
    const double e = std::exp(lv);
    sum += -0.5 * (1.0 + lv - mu * mu - e);
    if (dmu) (*dmu)[i] = static_cast<T>(mu / n);
    if (dlogvar) (*dlogvar)[i] = static_cast<T>(0.5 * (e - 1.0) / n);
  }
  return sum / n;
}

template <typename T>
LossBreakdown total_loss(const Tensor<T>& logits, std::span<const LabelMap> gt,
                         const LatentDistribution<T>& latent, const LossConfig& config,
                         Tensor<T>* dlogits, Tensor<T>* dmu, Tensor<T>* dlogvar) {
  const int classes = static_cast<int>(logits.dim(1));
  config.validate(classes);
  LossBreakdown out;
  out.wce = weighted_cross_entropy(logits, gt, config.effective_weights(classes), dlogits);
  out.kl = kl_loss(latent, dmu, dlogvar);
  out.total = out.wce + config.kl_weight * out.kl;
  const T lambda = static_cast<T>(config.kl_weight);
  if (dmu) {
    for (auto& v : dmu->storage()) v *= lambda;
  }
  if (dlogvar) {
    for (auto& v : dlogvar->storage()) v *= lambda;
  }
  return out;
}

#define MASKVAE_INSTANTIATE(T)                                                              \
  template double weighted_cross_entropy<T>(const Tensor<T>&, std::span<const LabelMap>,   \
                                            const ClassWeights&, Tensor<T>*);              \
  template double weighted_cross_entropy<T>(const Tensor<T>&, const LabelMap&,             \
                                            const ClassWeights&);                          \
  template double kl_loss<T>(const LatentDistribution<T>&, Tensor<T>*, Tensor<T>*);        \
  template LossBreakdown total_loss<T>(const Tensor<T>&, std::span<const LabelMap>,        \
                                       const LatentDistribution<T>&, const LossConfig&,    \
                                       Tensor<T>*, Tensor<T>*, Tensor<T>*);

MASKVAE_INSTANTIATE(float)
MASKVAE_INSTANTIATE(double)

#undef MASKVAE_INSTANTIATE

}  // namespace maskvae
