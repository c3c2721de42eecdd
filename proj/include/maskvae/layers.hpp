#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "maskvae/random.hpp"
#include "maskvae/tensor.hpp"

namespace maskvae {

template <typename T>
struct Parameter {
  Parameter(std::string name_, Shape shape) : name(std::move(name_)), value(shape), grad(shape) {}
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

template <typename T>
using ParameterList = std::vector<Parameter<T>*>;

// Fills with U(-bound, bound) using the portable engine draw.
template <typename T>
void fill_uniform(Tensor<T>& t, double bound, Rng& rng);

// y = x W^T + b over the last axis; leading axes are flattened into rows.
template <typename T>
class Linear {
 public:
  Linear(std::string name, std::size_t in_features, std::size_t out_features);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  // Accumulates parameter gradients and returns dL/dx (empty when
  // input_grad is false).
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, bool input_grad = true);
  void collect(ParameterList<T>& out) { out.push_back(&weight); out.push_back(&bias); }

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  Parameter<T> weight;  // [out, in]
  Parameter<T> bias;    // [out]

 private:
  std::size_t in_;
  std::size_t out_;
};

// Stride-1 convolution with "same" zero padding; kernel 1 or 3.
template <typename T>
class Conv2d {
 public:
  Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, int kernel);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;  // [B, Cin, H, W] -> [B, Cout, H, W]
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy);
  void collect(ParameterList<T>& out) { out.push_back(&weight); out.push_back(&bias); }

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }

  Parameter<T> weight;  // [Cout, Cin * k * k]
  Parameter<T> bias;    // [Cout]

 private:
  std::size_t in_;
  std::size_t out_;
  int kernel_;
};

template <typename T>
class GroupNorm {
 public:
  struct Cache {
    std::vector<T> mean;  // per (batch, group)
    std::vector<T> rstd;
  };

  GroupNorm(std::string name, std::size_t channels, std::size_t groups, T eps = T(1e-5));

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
  Tensor<T> backward(const Tensor<T>& x, const Cache& cache, const Tensor<T>& dy);
  void collect(ParameterList<T>& out) { out.push_back(&gamma); out.push_back(&beta); }

  Parameter<T> gamma;
  Parameter<T> beta;

 private:
  std::size_t channels_;
  std::size_t groups_;
  T eps_;
};

// Element-wise activations. Backward functions take the forward input.
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy);
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> gelu_backward(const Tensor<T>& x, const Tensor<T>& dy);
template <typename T> Tensor<T> silu(const Tensor<T>& x);
template <typename T> Tensor<T> silu_backward(const Tensor<T>& x, const Tensor<T>& dy);

// Nearest-neighbour 2x upsampling of [B, C, H, W] and its adjoint.
template <typename T> Tensor<T> upsample2x(const Tensor<T>& x);
template <typename T> Tensor<T> upsample2x_backward(const Tensor<T>& dy);

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b);

}  // namespace maskvae
