#include "mammil/ops.hpp"

#include <algorithm>
#include <cmath>

#include "mammil/error.hpp"

namespace mammil::ops {

namespace {

using NodePtr = std::shared_ptr<detail::TensorNode>;

Tensor make_output(Shape shape, bool requires_grad) {
  return Tensor::zeros(std::move(shape), requires_grad);
}

// rows/cols view that treats a 1-D tensor as a single row.
struct Mat {
  std::size_t rows;
  std::size_t cols;
};

Mat as_matrix(const Tensor& t, const char* what) {
  if (t.ndim() > 2) throw DimensionError(std::string(what) + " expects a 1-D or 2-D tensor, got " + shape_str(t.shape()));
  return {t.rows(), t.cols()};
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

real sigmoid_value(real v) {
  if (v >= 0) return real(1) / (real(1) + std::exp(-v));
  const real e = std::exp(v);
  return e / (real(1) + e);
}

real softplus_value(real v) { return std::max(v, real(0)) + std::log1p(std::exp(-std::abs(v))); }

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  const Mat ma = as_matrix(a, "matmul");
  const Mat mb = as_matrix(b, "matmul");
  if (ma.cols != mb.rows) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const bool rec = tape.wants({&a, &b});
  Tensor out = make_output({ma.rows, mb.cols}, rec);
  const auto A = a.data();
  const auto B = b.data();
  auto O = out.data();
  const std::size_t M = ma.rows, K = ma.cols, N = mb.cols;
  for (std::size_t i = 0; i < M; ++i) {
    real* orow = &O[i * N];
    for (std::size_t k = 0; k < K; ++k) {
      const real av = A[i * K + k];
      if (av == 0) continue;
      const real* brow = &B[k * N];
      for (std::size_t j = 0; j < N; ++j) orow[j] += av * brow[j];
    }
  }
  if (rec) {
    NodePtr na = a.node(), nb = b.node(), no = out.node();
    tape.record([na, nb, no, M, K, N] {
      const auto G = no->grad_span();
      if (na->requires_grad) {
        auto ga = na->grad_span();
        std::vector<real> bt(K * N);
        for (std::size_t k = 0; k < K; ++k)
          for (std::size_t j = 0; j < N; ++j) bt[j * K + k] = nb->value[k * N + j];
        for (std::size_t i = 0; i < M; ++i) {
          real* garow = &ga[i * K];
          for (std::size_t j = 0; j < N; ++j) {
            const real g = G[i * N + j];
            if (g == 0) continue;
            const real* btrow = &bt[j * K];
            for (std::size_t k = 0; k < K; ++k) garow[k] += g * btrow[k];
          }
        }
      }
      if (nb->requires_grad) {
        auto gb = nb->grad_span();
        for (std::size_t i = 0; i < M; ++i)
          for (std::size_t k = 0; k < K; ++k) {
            const real av = na->value[i * K + k];
            if (av == 0) continue;
            real* gbrow = &gb[k * N];
            const real* grow = &G[i * N];
            for (std::size_t j = 0; j < N; ++j) gbrow[j] += av * grow[j];
          }
      }
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  const Mat mx = as_matrix(x, "linear");
  if (w.ndim() != 2 || w.rows() != mx.cols) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not conform to weight " +
                         shape_str(w.shape()));
  }
  const std::size_t dout = w.cols();
  if (b.defined() && b.numel() != dout) {
    throw DimensionError("linear: bias " + shape_str(b.shape()) + " does not conform to weight " +
                         shape_str(w.shape()));
  }
  Tensor out = matmul(tape, x, w);
  if (!b.defined()) return out;
  const bool rec = tape.wants({&out, &b});
  // Bias added in place on the matmul output; its adjoint is a column sum.
  auto O = out.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < mx.rows; ++i)
    for (std::size_t j = 0; j < dout; ++j) O[i * dout + j] += B[j];
  if (rec && b.requires_grad()) {
    if (!out.requires_grad()) out.set_requires_grad(true);
    NodePtr nb = b.node(), no = out.node();
    const std::size_t M = mx.rows;
    tape.record([nb, no, M, dout] {
      auto gb = nb->grad_span();
      const auto G = no->grad_span();
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < dout; ++j) gb[j] += G[i * dout + j];
    });
  }
  return out;
}

Tensor unary(Tape& tape, Unary op, const Tensor& x) {
  const bool rec = tape.wants({&x});
  Tensor out = make_output(x.shape(), rec);
  const auto X = x.data();
  auto Y = out.data();
  const std::size_t n = X.size();
  switch (op) {
    case Unary::relu:
      for (std::size_t i = 0; i < n; ++i) Y[i] = X[i] > 0 ? X[i] : real(0);
      break;
    case Unary::silu:
      for (std::size_t i = 0; i < n; ++i) Y[i] = X[i] * sigmoid_value(X[i]);
      break;
    case Unary::tanh:
      for (std::size_t i = 0; i < n; ++i) Y[i] = std::tanh(X[i]);
      break;
    case Unary::softplus:
      for (std::size_t i = 0; i < n; ++i) Y[i] = softplus_value(X[i]);
      break;
    case Unary::exp:
      for (std::size_t i = 0; i < n; ++i) Y[i] = std::exp(X[i]);
      break;
    case Unary::sigmoid:
      for (std::size_t i = 0; i < n; ++i) Y[i] = sigmoid_value(X[i]);
      break;
  }
  if (rec) {
    NodePtr nx = x.node(), no = out.node();
    tape.record([nx, no, op, n] {
      auto gx = nx->grad_span();
      const auto G = no->grad_span();
      const auto& X = nx->value;
      const auto& Y = no->value;
      for (std::size_t i = 0; i < n; ++i) {
        real d = 0;
        switch (op) {
          case Unary::relu: d = X[i] > 0 ? real(1) : real(0); break;
          case Unary::silu: {
            const real s = sigmoid_value(X[i]);
            d = s * (real(1) + X[i] * (real(1) - s));
            break;
          }
          case Unary::tanh: d = real(1) - Y[i] * Y[i]; break;
          case Unary::softplus: d = sigmoid_value(X[i]); break;
          case Unary::exp: d = Y[i]; break;
          case Unary::sigmoid: d = Y[i] * (real(1) - Y[i]); break;
        }
        gx[i] += G[i] * d;
      }
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const bool rec = tape.wants({&a, &b});
  Tensor out = make_output(a.shape(), rec);
  auto O = out.data();
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < O.size(); ++i) O[i] = A[i] + B[i];
  if (rec) {
    NodePtr na = a.node(), nb = b.node(), no = out.node();
    tape.record([na, nb, no] {
      const auto G = no->grad_span();
      for (auto* n : {na.get(), nb.get()}) {
        if (!n->requires_grad) continue;
        auto g = n->grad_span();
        for (std::size_t i = 0; i < G.size(); ++i) g[i] += G[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const bool rec = tape.wants({&a, &b});
  Tensor out = make_output(a.shape(), rec);
  auto O = out.data();
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < O.size(); ++i) O[i] = A[i] * B[i];
  if (rec) {
    NodePtr na = a.node(), nb = b.node(), no = out.node();
    tape.record([na, nb, no] {
      const auto G = no->grad_span();
      if (na->requires_grad) {
        auto g = na->grad_span();
        for (std::size_t i = 0; i < G.size(); ++i) g[i] += G[i] * nb->value[i];
      }
      if (nb->requires_grad) {
        auto g = nb->grad_span();
        for (std::size_t i = 0; i < G.size(); ++i) g[i] += G[i] * na->value[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, real factor) {
  const bool rec = tape.wants({&x});
  Tensor out = make_output(x.shape(), rec);
  auto O = out.data();
  const auto X = x.data();
  for (std::size_t i = 0; i < O.size(); ++i) O[i] = X[i] * factor;
  if (rec) {
    NodePtr nx = x.node(), no = out.node();
    tape.record([nx, no, factor] {
      auto g = nx->grad_span();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += no->grad_span()[i] * factor;
    });
  }
  return out;
}

Tensor add_scalar(Tape& tape, const Tensor& x, real value) {
  const bool rec = tape.wants({&x});
  Tensor out = make_output(x.shape(), rec);
  auto O = out.data();
  const auto X = x.data();
  for (std::size_t i = 0; i < O.size(); ++i) O[i] = X[i] + value;
  if (rec) {
    NodePtr nx = x.node(), no = out.node();
    tape.record([nx, no] {
      auto g = nx->grad_span();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += no->grad_span()[i];
    });
  }
  return out;
}

Tensor mean_of(Tape& tape, std::span<const Tensor> xs) {
  if (xs.empty()) throw ValidationError("mean_of: empty input list");
  bool rec = false;
  for (const auto& x : xs) {
    require_same_shape(xs[0], x, "mean_of");
    rec = rec || tape.wants({&x});
  }
  Tensor out = make_output(xs[0].shape(), rec);
  auto O = out.data();
  const real inv = real(1) / real(xs.size());
  for (const auto& x : xs) {
    const auto X = x.data();
    for (std::size_t i = 0; i < O.size(); ++i) O[i] += X[i];
  }
  for (auto& o : O) o *= inv;
  if (rec) {
    std::vector<NodePtr> ins;
    for (const auto& x : xs) ins.push_back(x.node());
    NodePtr no = out.node();
    tape.record([ins, no, inv] {
      for (const auto& n : ins) {
        if (!n->requires_grad) continue;
        auto g = n->grad_span();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += no->grad_span()[i] * inv;
      }
    });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis) {
  const Mat m = as_matrix(x, "softmax");
  if (axis >= x.ndim()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_str(x.shape()));
  }
  // Iterate over "lines" along the axis: stride/count describe one line.
  const bool along_rows = x.ndim() == 1 || axis == 1;
  const std::size_t lines = along_rows ? m.rows : m.cols;
  const std::size_t len = along_rows ? m.cols : m.rows;
  const std::size_t stride = along_rows ? 1 : m.cols;
  auto start = [=](std::size_t l) { return along_rows ? l * m.cols : l; };

  const bool rec = tape.wants({&x});
  Tensor out = make_output(x.shape(), rec);
  const auto X = x.data();
  auto Y = out.data();
  for (std::size_t l = 0; l < lines; ++l) {
    const std::size_t s = start(l);
    real mx = X[s];
    for (std::size_t t = 1; t < len; ++t) mx = std::max(mx, X[s + t * stride]);
    real z = 0;
    for (std::size_t t = 0; t < len; ++t) {
      const real e = std::exp(X[s + t * stride] - mx);
      Y[s + t * stride] = e;
      z += e;
    }
    for (std::size_t t = 0; t < len; ++t) Y[s + t * stride] /= z;
  }
  if (rec) {
    NodePtr nx = x.node(), no = out.node();
    tape.record([nx, no, lines, len, stride, start] {
      auto gx = nx->grad_span();
      const auto G = no->grad_span();
      const auto& Y = no->value;
      for (std::size_t l = 0; l < lines; ++l) {
        const std::size_t s = start(l);
        real dot = 0;
        for (std::size_t t = 0; t < len; ++t) dot += G[s + t * stride] * Y[s + t * stride];
        for (std::size_t t = 0; t < len; ++t) {
          const std::size_t i = s + t * stride;
          gx[i] += Y[i] * (G[i] - dot);
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps) {
  const Mat m = as_matrix(x, "layer_norm");
  if (gamma.numel() != m.cols || beta.numel() != m.cols) {
    throw DimensionError("layer_norm: input " + shape_str(x.shape()) + " vs gamma " + shape_str(gamma.shape()) +
                         " / beta " + shape_str(beta.shape()));
  }
  if (!(eps > 0)) throw ValidationError("layer_norm: eps must be positive");
  const bool rec = tape.wants({&x, &gamma, &beta});
  Tensor out = make_output(x.shape(), rec);
  const std::size_t R = m.rows, D = m.cols;
  std::vector<real> xhat(R * D), rstd(R);
  const auto X = x.data();
  const auto Gm = gamma.data();
  const auto Bt = beta.data();
  auto Y = out.data();
  for (std::size_t r = 0; r < R; ++r) {
    const real* row = &X[r * D];
    real mean = 0;
    for (std::size_t d = 0; d < D; ++d) mean += row[d];
    mean /= real(D);
    real var = 0;
    for (std::size_t d = 0; d < D; ++d) var += (row[d] - mean) * (row[d] - mean);
    var /= real(D);
    rstd[r] = real(1) / std::sqrt(var + eps);
    for (std::size_t d = 0; d < D; ++d) {
      xhat[r * D + d] = (row[d] - mean) * rstd[r];
      Y[r * D + d] = xhat[r * D + d] * Gm[d] + Bt[d];
    }
  }
  if (rec) {
    NodePtr nx = x.node(), ng = gamma.node(), nb = beta.node(), no = out.node();
    tape.record([nx, ng, nb, no, R, D, xhat = std::move(xhat), rstd = std::move(rstd)] {
      const auto G = no->grad_span();
      if (nb->requires_grad) {
        auto gb = nb->grad_span();
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t d = 0; d < D; ++d) gb[d] += G[r * D + d];
      }
      if (ng->requires_grad) {
        auto gg = ng->grad_span();
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t d = 0; d < D; ++d) gg[d] += G[r * D + d] * xhat[r * D + d];
      }
      if (nx->requires_grad) {
        auto gx = nx->grad_span();
        for (std::size_t r = 0; r < R; ++r) {
          real mean_g = 0, mean_gx = 0;
          for (std::size_t d = 0; d < D; ++d) {
            const real gh = G[r * D + d] * ng->value[d];
            mean_g += gh;
            mean_gx += gh * xhat[r * D + d];
          }
          mean_g /= real(D);
          mean_gx /= real(D);
          for (std::size_t d = 0; d < D; ++d) {
            const real gh = G[r * D + d] * ng->value[d];
            gx[r * D + d] += rstd[r] * (gh - mean_g - xhat[r * D + d] * mean_gx);
          }
        }
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  const bool rec = tape.wants({&x});
  Tensor out = make_output({1}, rec);
  real s = 0;
  for (real v : x.data()) s += v;
  out[0] = s;
  if (rec) {
    NodePtr nx = x.node(), no = out.node();
    tape.record([nx, no] {
      auto g = nx->grad_span();
      const real go = no->grad_span()[0];
      for (auto& v : g) v += go;
    });
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> index) {
  const Mat m = as_matrix(x, "gather_rows");
  for (auto r : index) {
    if (r >= m.rows) {
      throw DimensionError("gather_rows: row index " + std::to_string(r) + " out of range for " + shape_str(x.shape()));
    }
  }
  if (index.empty()) throw DimensionError("gather_rows: empty index");
  const bool rec = tape.wants({&x});
  Tensor out = make_output({index.size(), m.cols}, rec);
  const auto X = x.data();
  auto O = out.data();
  const std::size_t D = m.cols;
  for (std::size_t r = 0; r < index.size(); ++r)
    std::copy_n(&X[index[r] * D], D, &O[r * D]);
  if (rec) {
    NodePtr nx = x.node(), no = out.node();
    std::vector<std::size_t> idx(index.begin(), index.end());
    tape.record([nx, no, idx = std::move(idx), D] {
      auto gx = nx->grad_span();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t d = 0; d < D; ++d) gx[idx[r] * D + d] += no->grad_span()[r * D + d];
    });
  }
  return out;
}

Tensor reverse_rows(Tape& tape, const Tensor& x) {
  const std::size_t R = x.rows();
  std::vector<std::size_t> idx(R);
  for (std::size_t r = 0; r < R; ++r) idx[r] = R - 1 - r;
  return gather_rows(tape, x, idx);
}

Tensor transpose(Tape& tape, const Tensor& x) {
  const Mat m = as_matrix(x, "transpose");
  const bool rec = tape.wants({&x});
  Tensor out = make_output({m.cols, m.rows}, rec);
  const auto X = x.data();
  auto O = out.data();
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) O[c * m.rows + r] = X[r * m.cols + c];
  if (rec) {
    NodePtr nx = x.node(), no = out.node();
    tape.record([nx, no, m] {
      auto gx = nx->grad_span();
      for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) gx[r * m.cols + c] += no->grad_span()[c * m.rows + r];
    });
  }
  return out;
}

}  // namespace mammil::ops
