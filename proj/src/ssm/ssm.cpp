#include "mammil/ssm.hpp"

#include <cmath>

#include "mammil/error.hpp"
#include "mammil/layers.hpp"
#include "mammil/ops.hpp"

namespace mammil::ssm {

HeadParams HeadParams::init(const Dims& dims, Rng& rng) {
  if (dims.heads == 0 || dims.head_dim == 0 || dims.state_dim == 0) {
    throw ValidationError("ssm dims must be positive");
  }
  HeadParams p;
  p.dims = dims;
  const std::size_t width = dims.width();
  const real bound = real(1) / std::sqrt(real(width));

  p.a_log = Tensor::zeros({dims.heads}, true);
  std::uniform_real_distribution<double> a_init(1.0, 2.0);
  for (auto& v : p.a_log.data()) v = real(std::log(a_init(rng)));

  p.w_b = uniform_parameter({width, dims.state_dim}, bound, rng);
  p.w_c = uniform_parameter({width, dims.state_dim}, bound, rng);
  p.w_delta = Tensor::zeros({width, dims.heads}, true);

  // Initial step sizes log-uniform in [0.01, 0.1]; bias is their inverse softplus.
  p.delta_bias = Tensor::zeros({dims.heads}, true);
  std::uniform_real_distribution<double> dt_init(std::log(0.01), std::log(0.1));
  for (auto& v : p.delta_bias.data()) {
    const double dt = std::exp(dt_init(rng));
    v = real(dt + std::log(-std::expm1(-dt)));
  }
  return p;
}

std::vector<std::pair<std::string, Tensor>> HeadParams::named(const std::string& prefix) const {
  return {{prefix + ".a_log", a_log},
          {prefix + ".w_b", w_b},
          {prefix + ".w_c", w_c},
          {prefix + ".w_delta", w_delta},
          {prefix + ".delta_bias", delta_bias}};
}

Selective selective_params(Tape& tape, const Tensor& x, const HeadParams& params) {
  if (x.ndim() != 2 || x.cols() != params.dims.width()) {
    throw DimensionError("selective_params: input " + shape_str(x.shape()) + " vs model width " +
                         std::to_string(params.dims.width()));
  }
  Selective s;
  s.b = ops::linear(tape, x, params.w_b, Tensor());
  s.c = ops::linear(tape, x, params.w_c, Tensor());
  s.delta = ops::softplus(tape, ops::linear(tape, x, params.w_delta, params.delta_bias));
  return s;
}

Discretized discretize(real a, real delta, std::span<const real> b) {
  Discretized d;
  d.a_bar = std::exp(delta * a);
  d.b_bar.reserve(b.size());
  for (real v : b) d.b_bar.push_back(delta * v);
  return d;
}

Tensor scan(Tape& tape, const Tensor& x, const Tensor& b, const Tensor& c, const Tensor& delta,
            const Tensor& a_log, const Dims& dims) {
  const std::size_t H = dims.heads, P = dims.head_dim, N = dims.state_dim;
  if (x.ndim() != 2 || x.cols() != H * P) {
    throw DimensionError("scan: input " + shape_str(x.shape()) + " does not match H·P = " + std::to_string(H * P));
  }
  const std::size_t M = x.rows();
  const Shape bc_shape{M, N};
  const Shape d_shape{M, H};
  if (b.shape() != bc_shape || c.shape() != bc_shape) {
    throw DimensionError("scan: B " + shape_str(b.shape()) + " / C " + shape_str(c.shape()) + " expected " +
                         shape_str(bc_shape));
  }
  if (delta.shape() != d_shape) {
    throw DimensionError("scan: delta " + shape_str(delta.shape()) + " expected " + shape_str(d_shape));
  }
  if (a_log.numel() != H) throw DimensionError("scan: a_log " + shape_str(a_log.shape()) + " expected [" + std::to_string(H) + "]");

  const bool rec = tape.wants({&x, &b, &c, &delta, &a_log});
  Tensor out = Tensor::zeros({M, H * P}, rec);

  const auto X = x.data();
  const auto Bv = b.data();
  const auto Cv = c.data();
  const auto Dt = delta.data();
  auto Y = out.data();
  std::vector<real> A(H);
  for (std::size_t h = 0; h < H; ++h) A[h] = -std::exp(a_log[h]);

  const std::size_t state_size = H * P * N;
  std::vector<real> state(state_size, real(0));
  std::vector<real> history;  // every S_i, only when recording
  std::vector<real> a_bar_all;
  if (rec) {
    history.resize(M * state_size);
    a_bar_all.resize(M * H);
  }

  for (std::size_t i = 0; i < M; ++i) {
    const real* Bi = &Bv[i * N];
    const real* Ci = &Cv[i * N];
    for (std::size_t h = 0; h < H; ++h) {
      const real d = Dt[i * H + h];
      const real a_bar = std::exp(d * A[h]);
      if (rec) a_bar_all[i * H + h] = a_bar;
      for (std::size_t p = 0; p < P; ++p) {
        const real xv = d * X[i * H * P + h * P + p];
        real* S = &state[(h * P + p) * N];
        real acc = 0;
#pragma omp simd reduction(+ : acc)
        for (std::size_t n = 0; n < N; ++n) {
          S[n] = a_bar * S[n] + xv * Bi[n];
          acc += S[n] * Ci[n];
        }
        if (!std::isfinite(acc)) {
          throw NumericError("scan: non-finite value at step " + std::to_string(i) + " (head " + std::to_string(h) + ")");
        }
        Y[i * H * P + h * P + p] = acc;
      }
    }
    if (rec) std::copy(state.begin(), state.end(), history.begin() + static_cast<std::ptrdiff_t>(i * state_size));
  }

  if (rec) {
    using NodePtr = std::shared_ptr<detail::TensorNode>;
    NodePtr nx = x.node(), nb = b.node(), nc = c.node(), nd = delta.node(), na = a_log.node(), no = out.node();
    tape.record([=, history = std::move(history), a_bar_all = std::move(a_bar_all), A = std::move(A)] {
      const auto GY = no->grad_span();
      const auto& X = nx->value;
      const auto& Bv = nb->value;
      const auto& Cv = nc->value;
      const auto& Dt = nd->value;
      // Gradients for inputs that do not require them go to scratch buffers.
      std::vector<real> gx_s, gb_s, gc_s, gd_s;
      auto slot = [](const NodePtr& n, std::vector<real>& scratch) -> real* {
        if (n->requires_grad) return n->grad_span().data();
        scratch.assign(n->value.size(), real(0));
        return scratch.data();
      };
      real* gx = slot(nx, gx_s);
      real* gb = slot(nb, gb_s);
      real* gc = slot(nc, gc_s);
      real* gd = slot(nd, gd_s);
      std::vector<real> gA(H, real(0));
      std::vector<real> G(state_size, real(0));  // dL/dS_i, carried backwards

      for (std::size_t ii = M; ii-- > 0;) {
        const real* S_cur = &history[ii * state_size];
        const real* S_prev = ii > 0 ? &history[(ii - 1) * state_size] : nullptr;
        const real* Bi = &Bv[ii * N];
        const real* Ci = &Cv[ii * N];
        for (std::size_t h = 0; h < H; ++h) {
          const real d = Dt[ii * H + h];
          const real a_bar = a_bar_all[ii * H + h];
          real dot_xb = 0, dot_prev = 0;
          for (std::size_t p = 0; p < P; ++p) {
            const std::size_t col = h * P + p;
            const real gy = GY[ii * H * P + col];
            const real xv = X[ii * H * P + col];
            real* Gp = &G[col * N];
            const real* Sc = &S_cur[col * N];
            real gxp = 0;
#pragma omp simd reduction(+ : gxp)
            for (std::size_t n = 0; n < N; ++n) {
              Gp[n] += gy * Ci[n];
              gc[ii * N + n] += gy * Sc[n];
              gxp += Gp[n] * Bi[n];
              gb[ii * N + n] += d * Gp[n] * xv;
            }
            gx[ii * H * P + col] += d * gxp;
            dot_xb += gxp * xv;
            if (S_prev) {
              const real* Sp = &S_prev[col * N];
              real dp = 0;
#pragma omp simd reduction(+ : dp)
              for (std::size_t n = 0; n < N; ++n) dp += Gp[n] * Sp[n];
              dot_prev += dp;
            }
            for (std::size_t n = 0; n < N; ++n) Gp[n] *= a_bar;
          }
          gd[ii * H + h] += dot_xb + dot_prev * A[h] * a_bar;
          gA[h] += dot_prev * d * a_bar;
        }
      }
      if (na->requires_grad) {
        auto ga = na->grad_span();
        for (std::size_t h = 0; h < H; ++h) ga[h] += gA[h] * A[h];
      }
    });
  }
  return out;
}

Tensor forward(Tape& tape, const Tensor& x, const HeadParams& params) {
  Selective s = selective_params(tape, x, params);
  return scan(tape, x, s.b, s.c, s.delta, params.a_log, params.dims);
}

Tensor bi_ssm(Tape& tape, const Tensor& x, const HeadParams& fwd, const HeadParams& bwd) {
  const auto& a = fwd.dims;
  const auto& b = bwd.dims;
  if (a.heads != b.heads || a.head_dim != b.head_dim || a.state_dim != b.state_dim) {
    throw DimensionError("bi_ssm: forward and backward parameter dimensions differ");
  }
  Tensor y_fwd = forward(tape, x, fwd);
  Tensor y_bwd = ops::reverse_rows(tape, forward(tape, ops::reverse_rows(tape, x), bwd));
  return ops::scale(tape, ops::add(tape, y_fwd, y_bwd), real(0.5));
}

}  // namespace mammil::ssm
