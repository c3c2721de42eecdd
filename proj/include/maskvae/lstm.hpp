#pragma once

#include <string>
#include <vector>

#include "maskvae/layers.hpp"

namespace maskvae {

// One direction of one LSTM layer over a [B, S, I] sequence. Gate order
// in the stacked weights is input, forget, cell, output. Every step's hidden
// state is kept, so the output is again a full sequence.
template <typename T>
class LstmDirection {
 public:
  struct Cache {
    Tensor<T> gates;   // [S, B, 4H] after activation, processing order
    Tensor<T> cells;   // [S, B, H]
    Tensor<T> hidden;  // [S, B, H]
  };

  LstmDirection(std::string name, std::size_t input_size, std::size_t hidden_size, bool reverse);

  void init(Rng& rng);
  // Writes hidden states into columns [offset, offset + H) of out [B, S, W].
  void forward(const Tensor<T>& x, Tensor<T>& out, std::size_t offset, Cache* cache) const;
  // Reads dL/dh from the same columns of dout and accumulates dL/dx into dx.
  void backward(const Tensor<T>& x, const Cache& cache, const Tensor<T>& dout,
                std::size_t offset, Tensor<T>& dx);
  void collect(ParameterList<T>& out) {
    out.push_back(&w_ih);
    out.push_back(&w_hh);
    out.push_back(&bias);
  }

  std::size_t hidden_size() const { return hidden_; }

  Parameter<T> w_ih;  // [4H, I]
  Parameter<T> w_hh;  // [4H, H]
  Parameter<T> bias;  // [4H]

 private:
  std::size_t input_;
  std::size_t hidden_;
  bool reverse_;
};

// Stacked (optionally bidirectional) LSTM. Bidirectional layers concatenate
// the forward and backward streams per step. Zero layers is the identity.
template <typename T>
class LstmStack {
 public:
  struct Cache {
    std::vector<Tensor<T>> inputs;
    std::vector<std::vector<typename LstmDirection<T>::Cache>> directions;
  };

  LstmStack(std::string name, std::size_t layers, std::size_t input_size,
            std::size_t hidden_size, bool bidirectional);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy);
  void collect(ParameterList<T>& out);

  std::size_t layers() const { return layers_.size(); }
  std::size_t output_size() const;

 private:
  std::vector<std::vector<LstmDirection<T>>> layers_;
  std::size_t input_;
  std::size_t hidden_;
  bool bidirectional_;
};

// Random orthogonal matrix (QR of a Gaussian draw), written row-major.
template <typename T>
void fill_orthogonal(T* dst, std::size_t n, Rng& rng);

}  // namespace maskvae
