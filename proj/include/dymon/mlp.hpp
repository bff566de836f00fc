#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dymon/errors.hpp"
#include "dymon/matrix.hpp"

namespace dymon {

inline constexpr double kLeakySlope = 0.2;

struct DenseLayer {
  Matrix weight;               // (fan_in x fan_out)
  std::vector<double> bias;    // fan_out
};

// Fully-connected network: leaky ReLU on hidden layers, linear output.
struct Params {
  std::vector<DenseLayer> layers;

  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> sizes;
    if (layers.empty()) return sizes;
    sizes.push_back(layers.front().weight.rows());
    for (const auto& l : layers) sizes.push_back(l.weight.cols());
    return sizes;
  }
  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
};

inline Params mlp_init(const std::vector<std::size_t>& layer_sizes, Rng& rng) {
  if (layer_sizes.size() < 2)
    throw config_error("mlp_init: need at least input and output sizes");
  for (std::size_t s : layer_sizes)
    if (s < 1) throw config_error("mlp_init: layer sizes must be >= 1");
  Params p;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    DenseLayer l;
    const double scale = std::sqrt(2.0 / static_cast<double>(layer_sizes[i]));
    l.weight = rng.normal_matrix(layer_sizes[i], layer_sizes[i + 1], scale);
    l.bias.assign(layer_sizes[i + 1], 0.0);
    p.layers.push_back(std::move(l));
  }
  return p;
}

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;    // pre-activation per layer
  std::vector<Matrix> post;   // activation output per layer (last = y)
};

inline Matrix mlp_forward(const Params& p, const Matrix& x,
                          ForwardCache* cache = nullptr) {
  if (p.layers.empty()) throw config_error("mlp_forward: empty network");
  if (x.cols() != p.input_dim())
    throw dimension_error("mlp_forward: input has " + std::to_string(x.cols()) +
                          " columns, network expects " +
                          std::to_string(p.input_dim()));
  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
  }
  Matrix h = x;
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const DenseLayer& l = p.layers[li];
    Matrix z = matmul(h, l.weight);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      double* zi = z.row(i);
      for (std::size_t j = 0; j < z.cols(); ++j) zi[j] += l.bias[j];
    }
    if (cache) cache->pre.push_back(z);
    const bool hidden = li + 1 < p.layers.size();
    if (hidden) {
      for (std::size_t i = 0; i < z.size(); ++i) {
        double& v = z.data()[i];
        if (v < 0.0) v *= kLeakySlope;
      }
    }
    if (cache) cache->post.push_back(z);
    h = std::move(z);
  }
  return h;
}

struct Gradients {
  Params params;  // same shapes as the network
  Matrix input;   // dL/dx
};

inline Params zeros_like(const Params& p) {
  Params g;
  for (const auto& l : p.layers) {
    DenseLayer gl;
    gl.weight = Matrix(l.weight.rows(), l.weight.cols());
    gl.bias.assign(l.bias.size(), 0.0);
    g.layers.push_back(std::move(gl));
  }
  return g;
}

inline Gradients mlp_backward(const Params& p, const ForwardCache& cache,
                              const Matrix& grad_y) {
  if (cache.pre.size() != p.layers.size())
    throw numeric_error("mlp_backward: cache does not match network depth");
  if (grad_y.rows() != cache.post.back().rows() ||
      grad_y.cols() != cache.post.back().cols())
    throw dimension_error("mlp_backward: grad_y shape mismatch");

  Gradients g;
  g.params = zeros_like(p);
  Matrix delta = grad_y;  // gradient w.r.t. current layer's post-activation
  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const bool hidden = li + 1 < p.layers.size();
    if (hidden) {
      const Matrix& pre = cache.pre[li];
      for (std::size_t i = 0; i < delta.size(); ++i)
        if (pre.data()[i] < 0.0) delta.data()[i] *= kLeakySlope;
    }
    const Matrix& in = li == 0 ? cache.input : cache.post[li - 1];
    g.params.layers[li].weight = matmul_at(in, delta);
    for (std::size_t j = 0; j < delta.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < delta.rows(); ++i) s += delta(i, j);
      g.params.layers[li].bias[j] = s;
    }
    delta = matmul_bt(delta, p.layers[li].weight);
  }
  g.input = std::move(delta);
  return g;
}

inline void accumulate(Params& acc, const Params& g, double scale = 1.0) {
  for (std::size_t li = 0; li < acc.layers.size(); ++li) {
    auto& a = acc.layers[li];
    const auto& b = g.layers[li];
    for (std::size_t i = 0; i < a.weight.size(); ++i)
      a.weight.data()[i] += scale * b.weight.data()[i];
    for (std::size_t i = 0; i < a.bias.size(); ++i)
      a.bias[i] += scale * b.bias[i];
  }
}

}  // namespace dymon
