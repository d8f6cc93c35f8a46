// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference kernels against their OpenMP counterparts. The parallel
// variants use the thread budget from BTTF_THREADS (or all cores).

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "bttf/gbt.hpp"
#include "bttf/kernels.hpp"
#include "bttf/rng.hpp"
#include "bttf/tensor.hpp"

using namespace bttf;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    num::Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

template <auto Gemm>
void BM_gemm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        Gemm(a.data(), b.data(), c.data(), n, n, n, false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}

template <auto Attention>
void BM_attention(benchmark::State& state) {
    const kernels::AttentionDims dims{static_cast<std::size_t>(state.range(0)), 7, 4, 16};
    const std::size_t cells = dims.batch * dims.seq * dims.width();
    const auto q = random_vec(cells, 3), k = random_vec(cells, 4), v = random_vec(cells, 5);
    std::vector<double> out(cells), w(dims.weight_count());
    for (auto _ : state) {
        Attention(q.data(), k.data(), v.data(), out.data(), w.data(), dims, 0.25);
        benchmark::DoNotOptimize(out.data());
    }
}

struct SplitFixture {
    num::Tensor x;
    gbt::SortedRows sorted;
    std::vector<double> g, h;

    explicit SplitFixture(std::size_t n) : x(n, 16), g(random_vec(n, 7)), h(n, 1.0) {
        num::Rng rng(6);
        for (double& v : x.values()) v = rng.normal();
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        sorted = gbt::sort_rows(x, rows);
    }
};

template <auto Split>
void BM_split(benchmark::State& state) {
    const SplitFixture f(static_cast<std::size_t>(state.range(0)));
    const gbt::GBTConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(Split(f.x, f.sorted, f.g, f.h, cfg));
}

template <auto Predict>
void BM_predict(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const SplitFixture f(2000);
    std::vector<double> y(2000);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f.x(i, 0) * f.x(i, 1) + f.g[i];
    gbt::GBTConfig cfg;
    cfg.n_rounds = 50;
    const auto model = gbt::fit_gbt(f.x, y, cfg).model;
    num::Tensor x(n, 16);
    num::Rng rng(8);
    for (double& v : x.values()) v = rng.normal();
    for (auto _ : state) benchmark::DoNotOptimize(Predict(model, x));
}

}  // namespace

BENCHMARK(BM_gemm<kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<kernels::omp::gemm_nn>)->Name("gemm_nn/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_attention<kernels::serial::attention_forward>)->Name("attention_forward/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_attention<kernels::omp::attention_forward>)->Name("attention_forward/omp")->Arg(64)->Arg(512);
BENCHMARK(BM_split<gbt::serial::find_best_split>)->Name("find_best_split/serial")->Arg(4096)->Arg(32768);
BENCHMARK(BM_split<gbt::omp::find_best_split>)->Name("find_best_split/omp")->Arg(4096)->Arg(32768);
BENCHMARK(BM_predict<gbt::serial::predict_batch>)->Name("predict_batch/serial")->Arg(10000);
BENCHMARK(BM_predict<gbt::omp::predict_batch>)->Name("predict_batch/omp")->Arg(10000);

BENCHMARK_MAIN();
