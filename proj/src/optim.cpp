// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include "bttf/optim.hpp"

#include <cmath>

#include "bttf/error.hpp"

namespace bttf::num {

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& cfg) {
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
        throw ConfigError("adam: beta1 and beta2 must lie in [0, 1)");
    }
    if (state.m.empty()) {
        for (const Parameter* p : params) {
            state.m.emplace_back(p->value.shape());
            state.v.emplace_back(p->value.shape());
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adam: state tracks a different parameter set");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        if (p.grad.shape() != p.value.shape() || m.shape() != p.value.shape()) {
            throw ShapeError("adam: '" + p.name + "' gradient/state shape mismatch");
        }
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m[j] / c1;
            const double v_hat = v[j] / c2;
            p.value[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

}  // namespace bttf::num
