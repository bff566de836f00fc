#pragma once

#include <cmath>
#include <string>

#include "dymon/errors.hpp"
#include "dymon/mlp.hpp"

namespace dymon {

struct AdamState {
  Params m;  // first moments, shaped like the network
  Params v;  // second moments
  std::size_t t = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState init(const Params& p, double lr = 1e-3, double b1 = 0.9,
                        double b2 = 0.999, double eps = 1e-8) {
    AdamState s;
    s.m = zeros_like(p);
    s.v = zeros_like(p);
    s.learning_rate = lr;
    s.beta1 = b1;
    s.beta2 = b2;
    s.epsilon = eps;
    return s;
  }
};

inline void adam_step(AdamState& state, Params& params, const Params& grads) {
  if (grads.layers.size() != params.layers.size())
    throw dimension_error("adam_step: gradient/param layer count mismatch");
  for (std::size_t li = 0; li < grads.layers.size(); ++li) {
    const auto& gl = grads.layers[li];
    for (std::size_t i = 0; i < gl.weight.size(); ++i)
      if (!std::isfinite(gl.weight.data()[i]))
        throw numeric_error("adam_step: non-finite weight gradient in layer " +
                            std::to_string(li));
    for (double b : gl.bias)
      if (!std::isfinite(b))
        throw numeric_error("adam_step: non-finite bias gradient in layer " +
                            std::to_string(li));
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  auto update = [&](double& x, double& m, double& v, double g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    x -= state.learning_rate * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
  };
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    auto& pl = params.layers[li];
    auto& ml = state.m.layers[li];
    auto& vl = state.v.layers[li];
    const auto& gl = grads.layers[li];
    for (std::size_t i = 0; i < pl.weight.size(); ++i)
      update(pl.weight.data()[i], ml.weight.data()[i], vl.weight.data()[i],
             gl.weight.data()[i]);
    for (std::size_t i = 0; i < pl.bias.size(); ++i)
      update(pl.bias[i], ml.bias[i], vl.bias[i], gl.bias[i]);
  }
}

}  // namespace dymon
