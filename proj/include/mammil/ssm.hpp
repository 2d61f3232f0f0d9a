#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mammil/tensor.hpp"
#include "mammil/wsi_graph.hpp"

namespace mammil::ssm {

struct Dims {
  std::size_t heads = 4;      // H
  std::size_t head_dim = 32;  // P
  std::size_t state_dim = 32; // N
  std::size_t width() const { return heads * head_dim; }
};

/// Parameters of one selective scan direction.
///
/// The state matrix of head h is A_h·I with A_h = -exp(a_log[h]) < 0. B and C
/// are N-wide projections of the input shared by all heads; Δ is per head.
struct HeadParams {
  Dims dims;
  Tensor a_log;       // [H]
  Tensor w_b;         // [H·P × N]
  Tensor w_c;         // [H·P × N]
  Tensor w_delta;     // [H·P × H]
  Tensor delta_bias;  // [H]

  static HeadParams init(const Dims& dims, Rng& rng);
  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

struct Selective {
  Tensor b;      // [M × N]
  Tensor c;      // [M × N]
  Tensor delta;  // [M × H], strictly positive
};

/// B = x·W_B, C = x·W_C, Δ = softplus(x·W_Δ + P_Δ).
Selective selective_params(Tape& tape, const Tensor& x, const HeadParams& params);

struct Discretized {
  real a_bar;
  std::vector<real> b_bar;
};

/// Zero-order-hold state transition exp(Δ·A) with the first-order input
/// approximation B̄ = Δ·B.
Discretized discretize(real a, real delta, std::span<const real> b);

/// Multi-head selective scan over x[M × H·P].
///
/// Per head: S_i = exp(Δ_i·A)·S_{i-1} + Δ_i·x_i·B_iᵀ (P×N, S_0 = 0) and
/// y_i = S_i·C_i. One left-to-right pass. Throws NumericError naming the step
/// when a non-finite value appears.
Tensor scan(Tape& tape, const Tensor& x, const Tensor& b, const Tensor& c, const Tensor& delta,
            const Tensor& a_log, const Dims& dims);

/// selective_params followed by scan.
Tensor forward(Tape& tape, const Tensor& x, const HeadParams& params);

/// ½·(forward_fwd(x) + reverse(forward_bwd(reverse(x)))).
Tensor bi_ssm(Tape& tape, const Tensor& x, const HeadParams& fwd, const HeadParams& bwd);

}  // namespace mammil::ssm
