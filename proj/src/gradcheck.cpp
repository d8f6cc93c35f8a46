// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include "bttf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "bttf/error.hpp"

namespace bttf::num {

namespace {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / denom;
}

void check_eps(double eps) {
    if (!(eps > 0.0)) throw ConfigError("grad_check: eps must be positive");
}

}  // namespace

double grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& x, double eps) {
    check_eps(eps);
    Tensor analytic;
    {
        Graph g;
        Var in = g.input(x, true);
        g.backward(f(g, in));
        analytic = g.grad(in.id).empty() ? Tensor(x.shape()) : g.grad(in.id);
    }
    auto eval = [&](const Tensor& at) {
        Graph g;
        return f(g, g.input(at, false)).value()[0];
    };
    double worst = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + eps;
        const double up = eval(probe);
        probe[i] = x[i] - eps;
        const double down = eval(probe);
        probe[i] = x[i];
        worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * eps)));
    }
    return worst;
}

double grad_check_params(const std::function<Var(Graph&)>& loss, std::span<Parameter* const> params, double eps) {
    check_eps(eps);
    for (Parameter* p : params) p->zero_grad();
    {
        Graph g;
        g.backward(loss(g));
    }
    auto eval = [&] {
        Graph g;
        return loss(g).value()[0];
    };
    double worst = 0.0;
    for (Parameter* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double x0 = p->value[i];
            p->value[i] = x0 + eps;
            const double up = eval();
            p->value[i] = x0 - eps;
            const double down = eval();
            p->value[i] = x0;
            worst = std::max(worst, relative_error(p->grad[i], (up - down) / (2.0 * eps)));
        }
    }
    return worst;
}

}  // namespace bttf::num
