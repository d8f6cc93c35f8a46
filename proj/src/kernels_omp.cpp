// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include <omp.h>

#include <cstdlib>
#include <string>
#include <vector>

#include "bttf/kernels.hpp"
#include "kernel_rows.hpp"

namespace bttf::kernels {

namespace omp {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(threads())
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        detail::gemm_nn_row(a, b, c, static_cast<std::size_t>(i), k, n, accumulate);
    }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(threads())
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        detail::gemm_nt_row(a, b, c, static_cast<std::size_t>(i), k, n, accumulate);
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(threads())
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        detail::gemm_tn_row(a, b, c, static_cast<std::size_t>(i), m, k, n, accumulate);
    }
}

void attention_forward(const double* q, const double* k, const double* v, double* out, double* weights,
                       const AttentionDims& dims, double scale) {
    const auto blocks = static_cast<std::ptrdiff_t>(dims.batch * dims.heads);
#pragma omp parallel for schedule(static) num_threads(threads())
    for (std::ptrdiff_t bh = 0; bh < blocks; ++bh) {
        detail::attention_forward_block(q, k, v, out, weights, dims, scale, static_cast<std::size_t>(bh));
    }
}

void attention_backward(const double* q, const double* k, const double* v, const double* weights,
                        const double* dout, double* dq, double* dk, double* dv, const AttentionDims& dims,
                        double scale) {
    const auto blocks = static_cast<std::ptrdiff_t>(dims.batch * dims.heads);
#pragma omp parallel num_threads(threads())
    {
        std::vector<double> scratch(2 * dims.seq * dims.seq);
#pragma omp for schedule(static)
        for (std::ptrdiff_t bh = 0; bh < blocks; ++bh) {
            detail::attention_backward_block(q, k, v, weights, dout, dq, dk, dv, dims, scale,
                                             static_cast<std::size_t>(bh), scratch.data());
        }
    }
}

}  // namespace omp

namespace {
int g_threads = 0;  // 0: not yet resolved

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 15;

bool go_parallel(std::size_t work) {
    return threads() > 1 && work >= kParallelWork;
}
}  // namespace

int default_threads() {
    if (const char* env = std::getenv("BTTF_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    return omp_get_max_threads();
}

void set_threads(int n) {
    g_threads = n > 0 ? n : 1;
}

int threads() noexcept {
    if (g_threads == 0) g_threads = default_threads();
    return g_threads;
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
    if (go_parallel(m * k * n)) return omp::gemm_nn(a, b, c, m, k, n, accumulate);
    serial::gemm_nn(a, b, c, m, k, n, accumulate);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
    if (go_parallel(m * k * n)) return omp::gemm_nt(a, b, c, m, k, n, accumulate);
    serial::gemm_nt(a, b, c, m, k, n, accumulate);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
    if (go_parallel(m * k * n)) return omp::gemm_tn(a, b, c, m, k, n, accumulate);
    serial::gemm_tn(a, b, c, m, k, n, accumulate);
}

void attention_forward(const double* q, const double* k, const double* v, double* out, double* weights,
                       const AttentionDims& dims, double scale) {
    if (go_parallel(dims.weight_count() * dims.head_dim)) {
        return omp::attention_forward(q, k, v, out, weights, dims, scale);
    }
    serial::attention_forward(q, k, v, out, weights, dims, scale);
}

void attention_backward(const double* q, const double* k, const double* v, const double* weights,
                        const double* dout, double* dq, double* dk, double* dv, const AttentionDims& dims,
                        double scale) {
    if (go_parallel(dims.weight_count() * dims.head_dim)) {
        return omp::attention_backward(q, k, v, weights, dout, dq, dk, dv, dims, scale);
    }
    serial::attention_backward(q, k, v, weights, dout, dq, dk, dv, dims, scale);
}

}  // namespace bttf::kernels
