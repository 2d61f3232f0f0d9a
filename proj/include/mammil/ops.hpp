#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mammil/tensor.hpp"

// Differentiable primitives. Every function records its adjoint on the tape
// when the tape is recording and at least one input requires a gradient.
namespace mammil::ops {

enum class Unary { relu, silu, tanh, softplus, exp, sigmoid };

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

/// x[M×Din]·W[Din×Dout] + b[Dout]. Pass an undefined Tensor for no bias.
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

Tensor unary(Tape& tape, Unary op, const Tensor& x);
inline Tensor relu(Tape& t, const Tensor& x) { return unary(t, Unary::relu, x); }
inline Tensor silu(Tape& t, const Tensor& x) { return unary(t, Unary::silu, x); }
inline Tensor tanh(Tape& t, const Tensor& x) { return unary(t, Unary::tanh, x); }
inline Tensor softplus(Tape& t, const Tensor& x) { return unary(t, Unary::softplus, x); }
inline Tensor exp(Tape& t, const Tensor& x) { return unary(t, Unary::exp, x); }
inline Tensor sigmoid(Tape& t, const Tensor& x) { return unary(t, Unary::sigmoid, x); }

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, real factor);
Tensor add_scalar(Tape& tape, const Tensor& x, real value);
/// Elementwise mean of equally-shaped tensors.
Tensor mean_of(Tape& tape, std::span<const Tensor> xs);

/// Softmax along `axis` of a 1-D or 2-D tensor.
Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis);

/// Row-wise layer normalization of a 2-D tensor.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  real eps = real(1e-5));

/// Sum of all entries, shape {1}.
Tensor sum(Tape& tape, const Tensor& x);

/// out[r] = x[index[r]] for the rows of a 2-D tensor.
Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> index);
Tensor reverse_rows(Tape& tape, const Tensor& x);
Tensor transpose(Tape& tape, const Tensor& x);

// Scalar-valued helpers for numeric routines outside the tape.
real softplus_value(real v);
real sigmoid_value(real v);

}  // namespace mammil::ops
