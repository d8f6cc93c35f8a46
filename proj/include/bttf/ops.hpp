// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "bttf/autodiff.hpp"

// Differentiable ops on rank-2 nodes. Every op validates shapes and throws
// ShapeError on mismatch.
namespace bttf::num {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// x[r x c] + bias broadcast over rows; bias has c elements.
Var add_row(Var x, Var bias);
/// x[r x c] + p[s x c] where row r of x receives row (r mod s) of p.
Var add_periodic_rows(Var x, Var p);
Var relu(Var a);
Var square(Var a);
/// Row-wise softmax with max subtraction. NaN input raises NumericError.
Var softmax_rows(Var a);
/// Per-row normalization to zero mean / unit variance, then gamma*x + beta.
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
/// Rows offset, offset+stride, offset+2*stride, ...
Var take_rows(Var x, std::size_t stride, std::size_t offset);
Var sum(Var a);
Var mean(Var a);
/// mean((pred - target)^2) over all elements.
Var mse_loss(Var pred, Var target);
/// mean(|pred - target|); subgradient 0 at ties.
Var mae_loss(Var pred, Var target);

/// Multi-head scaled dot-product attention core for `batch` stacked
/// sequences of length `seq`: q, k, v are [batch*seq x d], split into
/// `heads` column blocks. Scale is 1/sqrt(d/heads). The node's aux tensor
/// holds the attention weights, [batch*heads*seq x seq].
Var attention(Var q, Var k, Var v, std::size_t seq, std::size_t heads);

}  // namespace bttf::num
