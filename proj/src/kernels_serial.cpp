// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include "bttf/kernels.hpp"
#include "kernel_rows.hpp"

namespace bttf::kernels::serial {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) detail::gemm_nn_row(a, b, c, i, k, n, accumulate);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) detail::gemm_nt_row(a, b, c, i, k, n, accumulate);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) detail::gemm_tn_row(a, b, c, i, m, k, n, accumulate);
}

void attention_forward(const double* q, const double* k, const double* v, double* out, double* weights,
                       const AttentionDims& dims, double scale) {
    for (std::size_t bh = 0; bh < dims.batch * dims.heads; ++bh) {
        detail::attention_forward_block(q, k, v, out, weights, dims, scale, bh);
    }
}

void attention_backward(const double* q, const double* k, const double* v, const double* weights,
                        const double* dout, double* dq, double* dk, double* dv, const AttentionDims& dims,
                        double scale) {
    std::vector<double> scratch(2 * dims.seq * dims.seq);
    for (std::size_t bh = 0; bh < dims.batch * dims.heads; ++bh) {
        detail::attention_backward_block(q, k, v, weights, dout, dq, dk, dv, dims, scale, bh, scratch.data());
    }
}

}  // namespace bttf::kernels::serial
