#include "maskvae/layers.hpp"

#include <cmath>

#include "maskvae/errors.hpp"

namespace maskvae {

template <typename T>
void fill_uniform(Tensor<T>& t, double bound, Rng& rng) {
  for (auto& v : t.storage()) v = static_cast<T>(uniform_real(rng, -bound, bound));
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) throw InvalidInput("add: size mismatch");
  T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::string name, std::size_t in_features, std::size_t out_features)
    : weight(name + ".weight", {out_features, in_features}),
      bias(name + ".bias", {out_features}),
      in_(in_features),
      out_(out_features) {}

template <typename T>
void Linear<T>::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  fill_uniform(weight.value, bound, rng);
  fill_uniform(bias.value, bound, rng);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
  if (x.rank() == 0 || x.shape().back() != in_) {
    throw InvalidInput(weight.name + ": expected last axis " + std::to_string(in_) + ", got " +
                       shape_string(x.shape()));
  }
  const std::size_t rows = x.size() / in_;
  Shape out_shape = x.shape();
  out_shape.back() = out_;
  Tensor<T> y(out_shape);
  auto X = as_matrix(x.data(), rows, in_);
  auto W = as_matrix(weight.value.data(), out_, in_);
  auto Y = as_matrix(y.data(), rows, out_);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += ConstVectorMap<T>(bias.value.data(), static_cast<Eigen::Index>(out_)).transpose();
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& x, const Tensor<T>& dy, bool input_grad) {
  const std::size_t rows = x.size() / in_;
  auto X = as_matrix(x.data(), rows, in_);
  auto dY = as_matrix(dy.data(), rows, out_);
  auto W = as_matrix(weight.value.data(), out_, in_);
  as_matrix(weight.grad.data(), out_, in_).noalias() += dY.transpose() * X;
  VectorMap<T>(bias.grad.data(), static_cast<Eigen::Index>(out_)) += dY.colwise().sum().transpose();
  if (!input_grad) return {};
  Tensor<T> dx(x.shape());
  as_matrix(dx.data(), rows, in_).noalias() = dY * W;
  return dx;
}

// ---------------------------------------------------------------- Conv2d

namespace {

// col[(ci*k*k + ky*k + kx), y*W + x] = x[ci, y+ky-p, x+kx-p]
// Output columns x in [lo, hi) read a source column inside the image.
inline void valid_range(long shift, std::size_t w, std::size_t& lo, std::size_t& hi) {
  lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
  hi = shift > 0 ? w - static_cast<std::size_t>(shift) : w;
}

template <typename T>
void im2col(const T* src, std::size_t channels, std::size_t h, std::size_t w, int k, T* col) {
  const int pad = k / 2;
  const std::size_t plane = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + ((c * k + ky) * k + kx) * plane;
        const long shift = kx - pad;
        std::size_t lo, hi;
        valid_range(shift, w, lo, hi);
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - pad;
          T* out = row + y * w;
          if (sy < 0 || sy >= static_cast<long>(h)) {
            std::fill(out, out + w, T(0));
            continue;
          }
          const T* in = src + c * plane + static_cast<std::size_t>(sy) * w;
          std::fill(out, out + lo, T(0));
          std::copy(in + lo + shift, in + hi + shift, out + lo);
          std::fill(out + hi, out + w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, std::size_t channels, std::size_t h, std::size_t w, int k, T* dst) {
  const int pad = k / 2;
  const std::size_t plane = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + ((c * k + ky) * k + kx) * plane;
        const long shift = kx - pad;
        std::size_t lo, hi;
        valid_range(shift, w, lo, hi);
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - pad;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const T* in = row + y * w;
          T* out = dst + c * plane + static_cast<std::size_t>(sy) * w + shift;
          for (std::size_t x = lo; x < hi; ++x) out[x] += in[x];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Conv2d<T>::Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, int kernel)
    : weight(name + ".weight", {out_channels, in_channels * static_cast<std::size_t>(kernel * kernel)}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel) {
  if (kernel != 1 && kernel != 3) throw InvalidInput("Conv2d supports kernel 1 or 3");
}

template <typename T>
void Conv2d<T>::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * kernel_ * kernel_));
  fill_uniform(weight.value, bound, rng);
  fill_uniform(bias.value, bound, rng);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != in_) {
    throw InvalidInput(weight.name + ": expected [B," + std::to_string(in_) + ",H,W], got " +
                       shape_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), h = x.dim(2), w = x.dim(3), plane = h * w;
  const std::size_t patch = in_ * kernel_ * kernel_;
  Tensor<T> y({batch, out_, h, w});
  std::vector<T> col(kernel_ == 1 ? 0 : patch * plane);
  auto W = as_matrix(weight.value.data(), out_, patch);
  const ConstVectorMap<T> b(bias.value.data(), static_cast<Eigen::Index>(out_));
  for (std::size_t n = 0; n < batch; ++n) {
    const T* src = x.data() + n * in_ * plane;
    const T* cols = src;
    if (kernel_ != 1) {
      im2col(src, in_, h, w, kernel_, col.data());
      cols = col.data();
    }
    auto Y = as_matrix(y.data() + n * out_ * plane, out_, plane);
    Y.noalias() = W * as_matrix(cols, patch, plane);
    Y.colwise() += b;
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& x, const Tensor<T>& dy) {
  const std::size_t batch = x.dim(0), h = x.dim(2), w = x.dim(3), plane = h * w;
  const std::size_t patch = in_ * kernel_ * kernel_;
  Tensor<T> dx(x.shape());
  std::vector<T> col(kernel_ == 1 ? 0 : patch * plane);
  std::vector<T> dcol(kernel_ == 1 ? 0 : patch * plane);
  auto W = as_matrix(weight.value.data(), out_, patch);
  auto dW = as_matrix(weight.grad.data(), out_, patch);
  VectorMap<T> db(bias.grad.data(), static_cast<Eigen::Index>(out_));
  for (std::size_t n = 0; n < batch; ++n) {
    const T* src = x.data() + n * in_ * plane;
    auto dY = as_matrix(dy.data() + n * out_ * plane, out_, plane);
    db += dY.rowwise().sum();
    if (kernel_ == 1) {
      dW.noalias() += dY * as_matrix(src, patch, plane).transpose();
      as_matrix(dx.data() + n * in_ * plane, patch, plane).noalias() = W.transpose() * dY;
    } else {
      im2col(src, in_, h, w, kernel_, col.data());
      dW.noalias() += dY * as_matrix(col.data(), patch, plane).transpose();
      as_matrix(dcol.data(), patch, plane).noalias() = W.transpose() * dY;
      col2im_add(dcol.data(), in_, h, w, kernel_, dx.data() + n * in_ * plane);
    }
  }
  return dx;
}

// ------------------------------------------------------------- GroupNorm

template <typename T>
GroupNorm<T>::GroupNorm(std::string name, std::size_t channels, std::size_t groups, T eps)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      channels_(channels),
      groups_(groups),
      eps_(eps) {
  if (groups == 0 || channels % groups != 0) {
    throw InvalidInput(name + ": channels must be divisible by groups");
  }
  gamma.value.fill(T(1));
}

template <typename T>
Tensor<T> GroupNorm<T>::forward(const Tensor<T>& x, Cache* cache) const {
  if (x.rank() != 4 || x.dim(1) != channels_) {
    throw InvalidInput(gamma.name + ": bad input shape " + shape_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), plane = x.dim(2) * x.dim(3);
  const std::size_t per_group = channels_ / groups_;
  const std::size_t group_size = per_group * plane;
  Tensor<T> y(x.shape());
  if (cache) {
    cache->mean.assign(batch * groups_, T(0));
    cache->rstd.assign(batch * groups_, T(0));
  }
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t g = 0; g < groups_; ++g) {
      const std::size_t offset = (n * channels_ + g * per_group) * plane;
      const T* src = x.data() + offset;
      double sum = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < group_size; ++i) {
        sum += src[i];
        sq += static_cast<double>(src[i]) * src[i];
      }
      const double mean = sum / static_cast<double>(group_size);
      const double var = std::max(0.0, sq / static_cast<double>(group_size) - mean * mean);
      const T m = static_cast<T>(mean);
      const T rstd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps_)));
      if (cache) {
        cache->mean[n * groups_ + g] = m;
        cache->rstd[n * groups_ + g] = rstd;
      }
      T* dst = y.data() + offset;
      for (std::size_t c = 0; c < per_group; ++c) {
        const std::size_t ch = g * per_group + c;
        const T scale = gamma.value[ch] * rstd;
        const T shift = beta.value[ch] - m * scale;
        for (std::size_t i = 0; i < plane; ++i) dst[c * plane + i] = src[c * plane + i] * scale + shift;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> GroupNorm<T>::backward(const Tensor<T>& x, const Cache& cache, const Tensor<T>& dy) {
  const std::size_t batch = x.dim(0), plane = x.dim(2) * x.dim(3);
  const std::size_t per_group = channels_ / groups_;
  const double group_size = static_cast<double>(per_group * plane);
  Tensor<T> dx(x.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t g = 0; g < groups_; ++g) {
      const std::size_t offset = (n * channels_ + g * per_group) * plane;
      const T m = cache.mean[n * groups_ + g];
      const T rstd = cache.rstd[n * groups_ + g];
      const T* src = x.data() + offset;
      const T* d = dy.data() + offset;
      // Sums of dxhat and dxhat * xhat over the group.
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (std::size_t c = 0; c < per_group; ++c) {
        const std::size_t ch = g * per_group + c;
        const T gmm = gamma.value[ch];
        double dgamma = 0.0, dbeta = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
          const T xhat = (src[c * plane + i] - m) * rstd;
          const T g_out = d[c * plane + i];
          dgamma += static_cast<double>(g_out) * xhat;
          dbeta += g_out;
          sum_dxhat += static_cast<double>(g_out) * gmm;
          sum_dxhat_xhat += static_cast<double>(g_out) * gmm * xhat;
        }
        gamma.grad[ch] += static_cast<T>(dgamma);
        beta.grad[ch] += static_cast<T>(dbeta);
      }
      const T mean_dxhat = static_cast<T>(sum_dxhat / group_size);
      const T mean_dxhat_xhat = static_cast<T>(sum_dxhat_xhat / group_size);
      T* out = dx.data() + offset;
      for (std::size_t c = 0; c < per_group; ++c) {
        const T gmm = gamma.value[g * per_group + c];
        for (std::size_t i = 0; i < plane; ++i) {
          const T xhat = (src[c * plane + i] - m) * rstd;
          out[c * plane + i] = rstd * (d[c * plane + i] * gmm - mean_dxhat - xhat * mean_dxhat_xhat);
        }
      }
    }
  }
  return dx;
}

// ----------------------------------------------------------- activations

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
  return dx;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * inv_sqrt2));
  }
  return y;
}

template <typename T>
Tensor<T> gelu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx(x.shape());
  const T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
  const T inv_sqrt_2pi = static_cast<T>(0.39894228040143267794);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T cdf = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
    const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x[i] * x[i]);
    dx[i] = dy[i] * (cdf + x[i] * pdf);
  }
  return dx;
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto in = ConstVectorMap<T>(x.data(), n).array();
  VectorMap<T>(y.data(), n).array() = in / (T(1) + (-in).exp());
  return y;
}

template <typename T>
Tensor<T> silu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx(x.shape());
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto in = ConstVectorMap<T>(x.data(), n).array();
  const auto s = (T(1) + (-in).exp()).inverse();
  VectorMap<T>(dx.data(), n).array() =
      ConstVectorMap<T>(dy.data(), n).array() * s * (T(1) + in * (T(1) - s));
  return dx;
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  const std::size_t bc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({x.dim(0), x.dim(1), 2 * h, 2 * w});
  for (std::size_t p = 0; p < bc; ++p) {
    const T* src = x.data() + p * h * w;
    T* dst = y.data() + p * 4 * h * w;
    for (std::size_t yy = 0; yy < 2 * h; ++yy) {
      const T* row = src + (yy / 2) * w;
      T* out = dst + yy * 2 * w;
      for (std::size_t xx = 0; xx < w; ++xx) out[2 * xx] = out[2 * xx + 1] = row[xx];
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& dy) {
  const std::size_t bc = dy.dim(0) * dy.dim(1), h = dy.dim(2) / 2, w = dy.dim(3) / 2;
  Tensor<T> dx({dy.dim(0), dy.dim(1), h, w});
  for (std::size_t p = 0; p < bc; ++p) {
    const T* src = dy.data() + p * 4 * h * w;
    T* dst = dx.data() + p * h * w;
    for (std::size_t yy = 0; yy < 2 * h; ++yy) {
      const T* row = src + yy * 2 * w;
      T* out = dst + (yy / 2) * w;
      for (std::size_t xx = 0; xx < w; ++xx) out[xx] += row[2 * xx] + row[2 * xx + 1];
    }
  }
  return dx;
}

#define MASKVAE_INSTANTIATE(T)                                          \
  template void fill_uniform<T>(Tensor<T>&, double, Rng&);              \
  template void add_inplace<T>(Tensor<T>&, const Tensor<T>&);           \
  template class Linear<T>;                                             \
  template class Conv2d<T>;                                             \
  template class GroupNorm<T>;                                          \
  template Tensor<T> relu<T>(const Tensor<T>&);                         \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> gelu<T>(const Tensor<T>&);                         \
  template Tensor<T> gelu_backward<T>(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> silu<T>(const Tensor<T>&);                         \
  template Tensor<T> silu_backward<T>(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> upsample2x<T>(const Tensor<T>&);                   \
  template Tensor<T> upsample2x_backward<T>(const Tensor<T>&);

MASKVAE_INSTANTIATE(float)
MASKVAE_INSTANTIATE(double)

#undef MASKVAE_INSTANTIATE

}  // namespace maskvae
