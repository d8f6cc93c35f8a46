// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

// Dense inner loops used by the autodiff ops. Each kernel exists twice: a
// plain serial reference and an OpenMP version that partitions the output
// into disjoint blocks. Both accumulate every output element in the same
// order, so they agree bitwise regardless of thread count.
namespace bttf::kernels {

/// Scaled dot-product attention over a batch of equal-length sequences.
/// q, k, v and out are [batch*seq x heads*head_dim], row-major. Weights are
/// stored per (batch, head) as a seq x seq block: index ((b*heads + h)*seq + i)*seq + j.
struct AttentionDims {
    std::size_t batch;
    std::size_t seq;
    std::size_t heads;
    std::size_t head_dim;
    std::size_t width() const noexcept { return heads * head_dim; }
    std::size_t weight_count() const noexcept { return batch * heads * seq * seq; }
};

#define BTTF_KERNEL_DECLS                                                                          \
    /* c[m x n] (+)= a[m x k] * b[k x n] */                                                         \
    void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,       \
                 std::size_t n, bool accumulate);                                                  \
    /* c[m x n] (+)= a[m x k] * b[n x k]^T */                                                       \
    void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,       \
                 std::size_t n, bool accumulate);                                                  \
    /* c[m x n] (+)= a[k x m]^T * b[k x n] */                                                       \
    void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,       \
                 std::size_t n, bool accumulate);                                                  \
    void attention_forward(const double* q, const double* k, const double* v, double* out,        \
                           double* weights, const AttentionDims& dims, double scale);              \
    /* accumulates into dq, dk, dv */                                                               \
    void attention_backward(const double* q, const double* k, const double* v,                    \
                            const double* weights, const double* dout, double* dq, double* dk,    \
                            double* dv, const AttentionDims& dims, double scale);

namespace serial {
BTTF_KERNEL_DECLS
}

namespace omp {
BTTF_KERNEL_DECLS
}

#undef BTTF_KERNEL_DECLS

/// Thread budget for the dispatching wrappers below. 1 selects the serial path.
void set_threads(int n);
int threads() noexcept;
/// BTTF_THREADS if set and positive, otherwise the OpenMP default.
int default_threads();

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate = false);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate = false);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate = false);
void attention_forward(const double* q, const double* k, const double* v, double* out, double* weights,
                       const AttentionDims& dims, double scale);
void attention_backward(const double* q, const double* k, const double* v, const double* weights,
                        const double* dout, double* dq, double* dk, double* dv, const AttentionDims& dims,
                        double scale);

}  // namespace bttf::kernels
