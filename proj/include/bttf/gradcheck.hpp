// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>

#include "bttf/autodiff.hpp"

namespace bttf::num {

/// Max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|),
/// where numeric is the central difference with step eps. `f` must return a
/// scalar node built from its argument. eps <= 0 raises ConfigError.
double grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& x, double eps = 1e-6);

/// Same measure over every coordinate of a set of model parameters; `loss`
/// builds the graph through Graph::param. Parameter grads are overwritten.
double grad_check_params(const std::function<Var(Graph&)>& loss, std::span<Parameter* const> params,
                         double eps = 1e-6);

}  // namespace bttf::num
