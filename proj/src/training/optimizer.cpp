#include "maskvae/optimizer.hpp"

#include <cmath>

#include "maskvae/errors.hpp"
#include "maskvae/tensor_io.hpp"

namespace maskvae {

template <typename T>
Adam<T>::Adam(ParameterList<T> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (!(config_.learning_rate > 0) || !(config_.beta1 >= 0 && config_.beta1 < 1) ||
      !(config_.beta2 >= 0 && config_.beta2 < 1) || !(config_.eps > 0) || !(config_.grad_clip >= 0)) {
    throw ConfigError("invalid optimizer settings");
  }
  for (const auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

template <typename T>
double Adam<T>::step() {
  double sq = 0.0;
  for (const auto* p : params_) {
    for (const T g : p->grad.storage()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  double scale = 1.0;
  if (config_.grad_clip > 0 && norm > config_.grad_clip) scale = config_.grad_clip / norm;

  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const T lr_t = static_cast<T>(config_.learning_rate * std::sqrt(c2) / c1);
  const T eps_t = static_cast<T>(config_.eps * std::sqrt(c2));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    T* w = params_[i]->value.data();
    const T* g = params_[i]->grad.data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    const std::size_t n = params_[i]->value.size();
    for (std::size_t k = 0; k < n; ++k) {
      const T gk = static_cast<T>(g[k] * scale);
      m[k] = static_cast<T>(b1) * m[k] + static_cast<T>(1 - b1) * gk;
      v[k] = static_cast<T>(b2) * v[k] + static_cast<T>(1 - b2) * gk * gk;
      w[k] -= lr_t * m[k] / (std::sqrt(v[k]) + eps_t);
    }
  }
  return norm;
}

template <typename T>
void Adam<T>::save(const std::filesystem::path& path) const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({params_[i]->name + ".m", m_[i].template cast<float>()});
    out.push_back({params_[i]->name + ".v", v_[i].template cast<float>()});
  }
  write_tensors(path, out, steps_);
}

template <typename T>
void Adam<T>::load(const std::filesystem::path& path) {
  std::uint64_t steps = 0;
  const auto tensors = read_tensors(path, &steps);
  if (tensors.size() != 2 * params_.size()) {
    throw MismatchError("optimizer state in " + path.string() + " does not match the model");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& m = tensors[2 * i];
    const auto& v = tensors[2 * i + 1];
    if (m.name != params_[i]->name + ".m" || v.name != params_[i]->name + ".v" ||
        m.value.shape() != params_[i]->value.shape() || v.value.shape() != params_[i]->value.shape()) {
      throw MismatchError("optimizer state for " + params_[i]->name + " does not match the model");
    }
    m_[i] = m.value.template cast<T>();
    v_[i] = v.value.template cast<T>();
  }
  steps_ = steps;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace maskvae
