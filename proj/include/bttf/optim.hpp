// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bttf/autodiff.hpp"

namespace bttf::num {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t step = 0;
};

/// One bias-corrected Adam update of every parameter from its `grad`.
/// State is lazily sized on the first call. Throws ConfigError for betas
/// outside [0, 1) and ShapeError if the state does not match the params.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& cfg);

}  // namespace bttf::num
