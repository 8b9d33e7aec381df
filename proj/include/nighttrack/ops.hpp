#pragma once

#include <vector>

#include "nighttrack/tensor.hpp"

namespace nighttrack {

// Differentiable op set. Every op derives its output shape deterministically,
// validates inputs (ShapeError), checks the produced values for NaN/Inf
// (NumericsError) and appends a graph node when any input requires grad.
//
// Broadcasting is deliberately limited to scalar-times-tensor, bias-add over
// the last dim, per-channel offsets and per-row gates.

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
// max/min with gradient routed to the first argument on ties.
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);

// Constants.
Tensor mul_const(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
// max(x, c); clamp convention: gradient is zero in the clamped region.
Tensor clamp_min(const Tensor& a, double c);

// Learnable-scalar multiply: s has shape {1}.
Tensor scale(const Tensor& a, const Tensor& s);
// Row gates: a is {M,D}, gates is {M}; row i is multiplied by gates[i].
Tensor row_scale(const Tensor& a, const Tensor& gates);

// x is {M,D}, bias is {D}, added to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// x is {C,H,W}, offset is {C}; out = x + sign * offset[c].
Tensor add_channel(const Tensor& x, const Tensor& offset, double sign);

// Linear algebra / layout.
Tensor matmul(const Tensor& a, const Tensor& b);  // {m,k} x {k,n}
Tensor transpose(const Tensor& a);                // 2-D
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int dim);  // rank 1 or 2
Tensor slice(const Tensor& a, int dim, int64_t start, int64_t len);

// conv2d: input {C,H,W}, weight {O,C,kh,kw}, bias {O}; stride 1, symmetric
// zero padding `pad`.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int pad);

// Non-overlapping patch extraction: {C,H,W} -> {(H/P)*(W/P), C*P*P}; patches
// ordered row-major over the grid, (c,py,px) row-major within a patch.
Tensor im2patches(const Tensor& image, int patch);

// Per-row normalization over the last dim of {M,D}, then affine gamma/beta
// (both {D}).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);
// Row-wise softmax over the last dim of {M,N}.
Tensor softmax(const Tensor& x);

// Pointwise nonlinearities.
Tensor gelu(const Tensor& x);  // exact erf form
Tensor sigmoid(const Tensor& x);
Tensor abs(const Tensor& x);

// Full reductions to a {1} scalar.
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x);

}  // namespace nighttrack
