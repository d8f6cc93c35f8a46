// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Per-row / per-block bodies shared by the serial and OpenMP kernels. Keeping
// a single body is what makes the two paths bitwise identical.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "bttf/kernels.hpp"

namespace bttf::kernels::detail {

inline void gemm_nn_row(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                        std::size_t n, bool accumulate) {
    double* ci = c + i * n;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
        const double aip = ai[p];
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
}

inline void gemm_nt_row(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                        std::size_t n, bool accumulate) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
        ci[j] = accumulate ? ci[j] + s : s;
    }
}

// row i of a^T b, where a is [k x m]
inline void gemm_tn_row(const double* a, const double* b, double* c, std::size_t i, std::size_t m,
                        std::size_t k, std::size_t n, bool accumulate) {
    double* ci = c + i * n;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const double api = a[p * m + i];
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
}

inline void attention_forward_block(const double* q, const double* k, const double* v, double* out,
                                    double* weights, const AttentionDims& d, double scale, std::size_t bh) {
    const std::size_t b = bh / d.heads;
    const std::size_t h = bh % d.heads;
    const std::size_t width = d.width();
    const std::size_t col = h * d.head_dim;
    double* w = weights + bh * d.seq * d.seq;
    for (std::size_t i = 0; i < d.seq; ++i) {
        const double* qi = q + (b * d.seq + i) * width + col;
        double* wi = w + i * d.seq;
        double row_max = -INFINITY;
        for (std::size_t j = 0; j < d.seq; ++j) {
            const double* kj = k + (b * d.seq + j) * width + col;
            double s = 0.0;
            for (std::size_t c = 0; c < d.head_dim; ++c) s += qi[c] * kj[c];
            wi[j] = s * scale;
            row_max = std::max(row_max, wi[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < d.seq; ++j) {
            wi[j] = std::exp(wi[j] - row_max);
            total += wi[j];
        }
        for (std::size_t j = 0; j < d.seq; ++j) wi[j] /= total;

        double* oi = out + (b * d.seq + i) * width + col;
        std::fill(oi, oi + d.head_dim, 0.0);
        for (std::size_t j = 0; j < d.seq; ++j) {
            const double* vj = v + (b * d.seq + j) * width + col;
            for (std::size_t c = 0; c < d.head_dim; ++c) oi[c] += wi[j] * vj[c];
        }
    }
}

// scratch holds 2*seq*seq doubles
inline void attention_backward_block(const double* q, const double* k, const double* v, const double* weights,
                                     const double* dout, double* dq, double* dk, double* dv,
                                     const AttentionDims& d, double scale, std::size_t bh, double* scratch) {
    const std::size_t b = bh / d.heads;
    const std::size_t h = bh % d.heads;
    const std::size_t width = d.width();
    const std::size_t col = h * d.head_dim;
    const std::size_t S = d.seq;
    const double* w = weights + bh * S * S;
    double* dw = scratch;
    double* ds = scratch + S * S;
    auto at = [&](const double* base, std::size_t row) { return base + (b * S + row) * width + col; };
    auto at_mut = [&](double* base, std::size_t row) { return base + (b * S + row) * width + col; };

    for (std::size_t i = 0; i < S; ++i) {
        const double* doi = at(dout, i);
        for (std::size_t j = 0; j < S; ++j) {
            const double* vj = at(v, j);
            double s = 0.0;
            for (std::size_t c = 0; c < d.head_dim; ++c) s += doi[c] * vj[c];
            dw[i * S + j] = s;
        }
    }
    for (std::size_t j = 0; j < S; ++j) {
        double* dvj = at_mut(dv, j);
        for (std::size_t i = 0; i < S; ++i) {
            const double wij = w[i * S + j];
            const double* doi = at(dout, i);
            for (std::size_t c = 0; c < d.head_dim; ++c) dvj[c] += wij * doi[c];
        }
    }
    for (std::size_t i = 0; i < S; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < S; ++j) dot += w[i * S + j] * dw[i * S + j];
        for (std::size_t j = 0; j < S; ++j) ds[i * S + j] = w[i * S + j] * (dw[i * S + j] - dot) * scale;
    }
    for (std::size_t i = 0; i < S; ++i) {
        double* dqi = at_mut(dq, i);
        for (std::size_t j = 0; j < S; ++j) {
            const double g = ds[i * S + j];
            const double* kj = at(k, j);
            for (std::size_t c = 0; c < d.head_dim; ++c) dqi[c] += g * kj[c];
        }
    }
    for (std::size_t j = 0; j < S; ++j) {
        double* dkj = at_mut(dk, j);
        for (std::size_t i = 0; i < S; ++i) {
            const double g = ds[i * S + j];
            const double* qi = at(q, i);
            for (std::size_t c = 0; c < d.head_dim; ++c) dkj[c] += g * qi[c];
        }
    }
}

}  // namespace bttf::kernels::detail
