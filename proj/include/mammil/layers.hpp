#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mammil/ops.hpp"
#include "mammil/tensor.hpp"

namespace mammil {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Trainable tensor with entries drawn from U(-bound, bound).
template <class Rng>
Tensor uniform_parameter(Shape shape, real bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-double(bound), double(bound));
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.data()) v = real(dist(rng));
  return t;
}

/// Dense layer y = x·W + b with fan-in scaled uniform initialization.
struct Linear {
  Tensor weight;  // [in × out]
  Tensor bias;    // [out]

  template <class Rng>
  static Linear init(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true) {
    const real bound = real(1) / std::sqrt(real(in));
    Linear l;
    l.weight = uniform_parameter({in, out}, bound, rng);
    if (with_bias) l.bias = uniform_parameter({out}, bound, rng);
    return l;
  }

  Tensor operator()(Tape& tape, const Tensor& x) const { return ops::linear(tape, x, weight, bias); }

  void append_named(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".weight", weight);
    if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
  }
};

}  // namespace mammil
