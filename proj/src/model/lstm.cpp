#include "maskvae/lstm.hpp"

#include <cmath>

#include <Eigen/QR>

#include "maskvae/errors.hpp"

namespace maskvae {

namespace {

template <typename T>
using StridedRows = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using MutableStridedRows = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;

template <typename T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

}  // namespace

template <typename T>
void fill_orthogonal(T* dst, std::size_t n, Rng& rng) {
  NormalSampler normal;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign correction makes the draw uniform over the orthogonal group.
  const Eigen::MatrixXd r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dst[i * n + j] = static_cast<T>(q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
}

template <typename T>
LstmDirection<T>::LstmDirection(std::string name, std::size_t input_size,
                                std::size_t hidden_size, bool reverse)
    : w_ih(name + ".w_ih", {4 * hidden_size, input_size}),
      w_hh(name + ".w_hh", {4 * hidden_size, hidden_size}),
      bias(name + ".bias", {4 * hidden_size}),
      input_(input_size),
      hidden_(hidden_size),
      reverse_(reverse) {}

template <typename T>
void LstmDirection<T>::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
  fill_uniform(w_ih.value, bound, rng);
  for (std::size_t gate = 0; gate < 4; ++gate) {
    fill_orthogonal(w_hh.value.data() + gate * hidden_ * hidden_, hidden_, rng);
  }
  bias.value.fill(T(0));
}

template <typename T>
void LstmDirection<T>::forward(const Tensor<T>& x, Tensor<T>& out, std::size_t offset,
                               Cache* cache) const {
  const std::size_t batch = x.dim(0), steps = x.dim(1), width = out.dim(2);
  const std::size_t h4 = 4 * hidden_;
  // Input projections for every (b, t) at once: row b * S + t.
  RowMatrix<T> z_in = as_matrix(x.data(), batch * steps, input_) *
                      as_matrix(w_ih.value.data(), h4, input_).transpose();
  z_in.rowwise() += ConstVectorMap<T>(bias.value.data(), static_cast<Eigen::Index>(h4)).transpose();
  auto W_hh = as_matrix(w_hh.value.data(), h4, hidden_);

  Tensor<T> gates({steps, batch, h4});
  Tensor<T> cells({steps, batch, hidden_});
  Tensor<T> hidden({steps, batch, hidden_});
  RowMatrix<T> z(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(h4));
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse_ ? steps - 1 - s : s;
    for (std::size_t b = 0; b < batch; ++b) z.row(static_cast<Eigen::Index>(b)) = z_in.row(static_cast<Eigen::Index>(b * steps + t));
    if (s > 0) {
      z.noalias() += as_matrix(hidden.data() + (s - 1) * batch * hidden_, batch, hidden_) * W_hh.transpose();
    }
    T* g = gates.data() + s * batch * h4;
    T* c = cells.data() + s * batch * hidden_;
    T* h = hidden.data() + s * batch * hidden_;
    const T* c_prev = s > 0 ? cells.data() + (s - 1) * batch * hidden_ : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      const T* zr = z.data() + b * h4;
      T* gr = g + b * h4;
      for (std::size_t j = 0; j < hidden_; ++j) {
        const T ig = sigmoid(zr[j]);
        const T fg = sigmoid(zr[hidden_ + j]);
        const T cg = std::tanh(zr[2 * hidden_ + j]);
        const T og = sigmoid(zr[3 * hidden_ + j]);
        gr[j] = ig;
        gr[hidden_ + j] = fg;
        gr[2 * hidden_ + j] = cg;
        gr[3 * hidden_ + j] = og;
        const T cell = (c_prev ? fg * c_prev[b * hidden_ + j] : T(0)) + ig * cg;
        c[b * hidden_ + j] = cell;
        const T hv = og * std::tanh(cell);
        h[b * hidden_ + j] = hv;
        out[(b * steps + t) * width + offset + j] = hv;
      }
    }
  }
  if (cache) {
    cache->gates = std::move(gates);
    cache->cells = std::move(cells);
    cache->hidden = std::move(hidden);
  }
}

template <typename T>
void LstmDirection<T>::backward(const Tensor<T>& x, const Cache& cache, const Tensor<T>& dout,
                                std::size_t offset, Tensor<T>& dx) {
  const std::size_t batch = x.dim(0), steps = x.dim(1), width = dout.dim(2);
  const std::size_t h4 = 4 * hidden_;
  auto W_hh = as_matrix(w_hh.value.data(), h4, hidden_);
  RowMatrix<T> dz_all = RowMatrix<T>::Zero(static_cast<Eigen::Index>(batch * steps), static_cast<Eigen::Index>(h4));
  RowMatrix<T> dh_next = RowMatrix<T>::Zero(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(hidden_));
  RowMatrix<T> dc_next = dh_next;
  RowMatrix<T> dz(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(h4));
  auto dW_hh = as_matrix(w_hh.grad.data(), h4, hidden_);

  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t t = reverse_ ? steps - 1 - s : s;
    const T* g = cache.gates.data() + s * batch * h4;
    const T* c = cache.cells.data() + s * batch * hidden_;
    const T* c_prev = s > 0 ? cache.cells.data() + (s - 1) * batch * hidden_ : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      const T* gr = g + b * h4;
      T* dzr = dz.data() + b * h4;
      for (std::size_t j = 0; j < hidden_; ++j) {
        const T ig = gr[j], fg = gr[hidden_ + j], cg = gr[2 * hidden_ + j], og = gr[3 * hidden_ + j];
        const T tc = std::tanh(c[b * hidden_ + j]);
        const T dh = dout[(b * steps + t) * width + offset + j] + dh_next(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j));
        const T d_o = dh * tc;
        const T dc = dh * og * (T(1) - tc * tc) + dc_next(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j));
        const T d_i = dc * cg;
        const T d_g = dc * ig;
        const T d_f = c_prev ? dc * c_prev[b * hidden_ + j] : T(0);
        dc_next(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) = dc * fg;
        dzr[j] = d_i * ig * (T(1) - ig);
        dzr[hidden_ + j] = d_f * fg * (T(1) - fg);
        dzr[2 * hidden_ + j] = d_g * (T(1) - cg * cg);
        dzr[3 * hidden_ + j] = d_o * og * (T(1) - og);
      }
    }
    for (std::size_t b = 0; b < batch; ++b) dz_all.row(static_cast<Eigen::Index>(b * steps + t)) = dz.row(static_cast<Eigen::Index>(b));
    if (s > 0) {
      dW_hh.noalias() += dz.transpose() * as_matrix(cache.hidden.data() + (s - 1) * batch * hidden_, batch, hidden_);
      dh_next.noalias() = dz * W_hh;
    }
  }
  as_matrix(w_ih.grad.data(), h4, input_).noalias() += dz_all.transpose() * as_matrix(x.data(), batch * steps, input_);
  VectorMap<T>(bias.grad.data(), static_cast<Eigen::Index>(h4)) += dz_all.colwise().sum().transpose();
  as_matrix(dx.data(), batch * steps, input_).noalias() += dz_all * as_matrix(w_ih.value.data(), h4, input_);
}

template <typename T>
LstmStack<T>::LstmStack(std::string name, std::size_t layers, std::size_t input_size,
                        std::size_t hidden_size, bool bidirectional)
    : input_(input_size), hidden_(hidden_size), bidirectional_(bidirectional) {
  const std::size_t width = hidden_size * (bidirectional ? 2 : 1);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? input_size : width;
    std::vector<LstmDirection<T>> dirs;
    const std::string prefix = name + ".layer" + std::to_string(l);
    dirs.emplace_back(prefix + ".forward", in, hidden_size, false);
    if (bidirectional) dirs.emplace_back(prefix + ".backward", in, hidden_size, true);
    layers_.push_back(std::move(dirs));
  }
}

template <typename T>
std::size_t LstmStack<T>::output_size() const {
  return layers_.empty() ? input_ : hidden_ * (bidirectional_ ? 2 : 1);
}

template <typename T>
void LstmStack<T>::init(Rng& rng) {
  for (auto& layer : layers_) {
    for (auto& dir : layer) dir.init(rng);
  }
}

template <typename T>
void LstmStack<T>::collect(ParameterList<T>& out) {
  for (auto& layer : layers_) {
    for (auto& dir : layer) dir.collect(out);
  }
}

template <typename T>
Tensor<T> LstmStack<T>::forward(const Tensor<T>& x, Cache* cache) const {
  if (x.rank() != 3 || x.dim(2) != input_) {
    throw InvalidInput("lstm: expected [B, S, " + std::to_string(input_) + "], got " +
                       shape_string(x.shape()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->directions.assign(layers_.size(), {});
  }
  Tensor<T> current = x;
  const std::size_t width = output_size();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Tensor<T> out({x.dim(0), x.dim(1), width});
    for (std::size_t d = 0; d < layers_[l].size(); ++d) {
      typename LstmDirection<T>::Cache* dc = nullptr;
      if (cache) {
        cache->directions[l].emplace_back();
        dc = &cache->directions[l].back();
      }
      layers_[l][d].forward(current, out, d * hidden_, dc);
    }
    if (cache) cache->inputs.push_back(std::move(current));
    current = std::move(out);
  }
  return current;
}

template <typename T>
Tensor<T> LstmStack<T>::backward(const Cache& cache, const Tensor<T>& dy) {
  Tensor<T> grad = dy;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Tensor<T>& in = cache.inputs[l];
    Tensor<T> dx(in.shape());
    for (std::size_t d = 0; d < layers_[l].size(); ++d) {
      layers_[l][d].backward(in, cache.directions[l][d], grad, d * hidden_, dx);
    }
    grad = std::move(dx);
  }
  return grad;
}

template void fill_orthogonal<float>(float*, std::size_t, Rng&);
template void fill_orthogonal<double>(double*, std::size_t, Rng&);
template class LstmDirection<float>;
template class LstmDirection<double>;
template class LstmStack<float>;
template class LstmStack<double>;

}  // namespace maskvae
