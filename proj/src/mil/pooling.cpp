#include <cmath>

#include "mammil/error.hpp"
#include "mammil/mil.hpp"

namespace mammil {

AttentionPool AttentionPool::init(std::size_t dim, std::size_t hidden, bool gated, Rng& rng) {
  AttentionPool p;
  p.v = uniform_parameter({dim, hidden}, real(1) / std::sqrt(real(dim)), rng);
  p.w = uniform_parameter({hidden, 1}, real(1) / std::sqrt(real(hidden)), rng);
  if (gated) p.u = uniform_parameter({dim, hidden}, real(1) / std::sqrt(real(dim)), rng);
  return p;
}

void AttentionPool::append_named(NamedTensors& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".v", v);
  out.emplace_back(prefix + ".w", w);
  if (gated()) out.emplace_back(prefix + ".u", u);
}

PoolOutput attention_pool(Tape& tape, const Tensor& h, const AttentionPool& pool) {
  if (h.ndim() != 2 || h.cols() != pool.v.rows()) {
    throw DimensionError("attention_pool: input " + shape_str(h.shape()) + " vs scorer " + shape_str(pool.v.shape()));
  }
  Tensor hidden = ops::tanh(tape, ops::matmul(tape, h, pool.v));
  if (pool.gated()) hidden = ops::mul(tape, hidden, ops::sigmoid(tape, ops::matmul(tape, h, pool.u)));
  Tensor scores = ops::matmul(tape, hidden, pool.w);
  PoolOutput out;
  out.alpha = ops::softmax(tape, scores, 0);
  out.z = ops::matmul(tape, ops::transpose(tape, out.alpha), h);
  return out;
}

}  // namespace mammil
