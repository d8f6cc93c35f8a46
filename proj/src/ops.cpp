// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include "bttf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bttf/error.hpp"
#include "bttf/kernels.hpp"

namespace bttf::num {

namespace {

Shape shape2(std::size_t r, std::size_t c) { return Shape{r, c}; }

void require_same(Var a, Var b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
}

template <class F>
void accumulate_into(Graph& g, std::size_t id, F&& per_index) {
    if (!g.requires_grad(id)) return;
    Tensor& gr = g.grad_buffer(id);
    for (std::size_t i = 0; i < gr.size(); ++i) gr[i] += per_index(i);
}

}  // namespace

Var matmul(Var a, Var b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    Tensor out(shape2(m, n));
    kernels::gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
    return a.graph->record("matmul", {a, b}, std::move(out), [a_id = a.id, b_id = b.id, m, k, n](Graph& g, std::size_t self) {
        const Tensor& dy = g.grad(self);
        if (g.requires_grad(a_id)) {
            kernels::gemm_nt(dy.data(), g.value(b_id).data(), g.grad_buffer(a_id).data(), m, n, k, true);
        }
        if (g.requires_grad(b_id)) {
            kernels::gemm_tn(g.value(a_id).data(), dy.data(), g.grad_buffer(b_id).data(), k, m, n, true);
        }
    });
}

Var add(Var a, Var b) {
    require_same(a, b, "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return a.graph->record("add", {a, b}, std::move(out), [a_id = a.id, b_id = b.id](Graph& g, std::size_t self) {
        const Tensor& dy = g.grad(self);
        accumulate_into(g, a_id, [&](std::size_t i) { return dy[i]; });
        accumulate_into(g, b_id, [&](std::size_t i) { return dy[i]; });
    });
}

Var sub(Var a, Var b) {
    require_same(a, b, "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    return a.graph->record("sub", {a, b}, std::move(out), [a_id = a.id, b_id = b.id](Graph& g, std::size_t self) {
        const Tensor& dy = g.grad(self);
        accumulate_into(g, a_id, [&](std::size_t i) { return dy[i]; });
        accumulate_into(g, b_id, [&](std::size_t i) { return -dy[i]; });
    });
}

Var mul(Var a, Var b) {
    require_same(a, b, "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return a.graph->record("mul", {a, b}, std::move(out), [a_id = a.id, b_id = b.id](Graph& g, std::size_t self) {
        const Tensor& dy = g.grad(self);
        const Tensor& av = g.value(a_id);
        const Tensor& bv = g.value(b_id);
        accumulate_into(g, a_id, [&](std::size_t i) { return dy[i] * bv[i]; });
        accumulate_into(g, b_id, [&](std::size_t i) { return dy[i] * av[i]; });
    });
}

Var scale(Var a, double factor) {
    Tensor out = a.value();
    for (double& v : out.values()) v *= factor;
    return a.graph->record("scale", {a}, std::move(out), [a_id = a.id, factor](Graph& g, std::size_t self) {
        const Tensor& dy = g.grad(self);
        accumulate_into(g, a_id, [&](std::size_t i) { return dy[i] * factor; });
    });
}

Var add_row(Var x, Var bias) {
    const std::size_t r = x.rows(), c = x.cols();
    if (bias.value().size() != c) {
        throw ShapeError("add_row: bias " + shape_string(bias.shape()) + " for " + shape_string(x.shape()));
    }
    Tensor out = x.value();
    const Tensor& bv = bias.value();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out(i, j) += bv[j];
    }
    return x.graph->record("add_row", {x, bias}, std::move(out), [x_id = x.id, b_id = bias.id, r, c](Graph& g, std::size_t self) {
        const Tensor& dy = g.grad(self);
        accumulate_into(g, x_id, [&](std::size_t i) { return dy[i]; });
        if (g.requires_grad(b_id)) {
            Tensor& gb = g.grad_buffer(b_id);
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) gb[j] += dy(i, j);
            }
        }
    });
}

Var add_periodic_rows(Var x, Var p) {
    const std::size_t r = x.rows(), c = x.cols(), s = p.rows();
    if (p.cols() != c || s == 0 || r % s != 0) {
        throw ShapeError("add_periodic_rows: " + shape_string(p.shape()) + " onto " + shape_string(x.shape()));
    }
    Tensor out = x.value();
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out(i, j) += pv(i % s, j);
    }
    return x.graph->record("add_periodic_rows", {x, p}, std::move(out), [x_id = x.id, p_id = p.id, r, c, s](Graph& g, std::size_t self) {
        const Tensor& dy = g.grad(self);
        accumulate_into(g, x_id, [&](std::size_t i) { return dy[i]; });
        if (g.requires_grad(p_id)) {
            Tensor& gp = g.grad_buffer(p_id);
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) gp(i % s, j) += dy(i, j);
            }
        }
    });
}

Var relu(Var a) {
    Tensor out = a.value();
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return a.graph->record("relu", {a}, std::move(out), [a_id = a.id](Graph& g, std::size_t self) {
        const Tensor& dy = g.grad(self);
        const Tensor& av = g.value(a_id);
        accumulate_into(g, a_id, [&](std::size_t i) { return av[i] > 0.0 ? dy[i] : 0.0; });
    });
}

Var square(Var a) {
    Tensor out = a.value();
    for (double& v : out.values()) v *= v;
    return a.graph->record("square", {a}, std::move(out), [a_id = a.id](Graph& g, std::size_t self) {
        const Tensor& dy = g.grad(self);
        const Tensor& av = g.value(a_id);
        accumulate_into(g, a_id, [&](std::size_t i) { return 2.0 * av[i] * dy[i]; });
    });
}

Var softmax_rows(Var a) {
    const std::size_t r = a.rows(), c = a.cols();
    Tensor out(a.shape());
    const Tensor& av = a.value();
    for (std::size_t i = 0; i < r; ++i) {
        double row_max = -INFINITY;
        for (std::size_t j = 0; j < c; ++j) {
            if (std::isnan(av(i, j))) throw NumericError("softmax_rows: NaN in row " + std::to_string(i));
            row_max = std::max(row_max, av(i, j));
        }
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out(i, j) = std::exp(av(i, j) - row_max);
            total += out(i, j);
        }
        for (std::size_t j = 0; j < c; ++j) out(i, j) /= total;
    }
    return a.graph->record("softmax_rows", {a}, std::move(out), [a_id = a.id, r, c](Graph& g, std::size_t self) {
        if (!g.requires_grad(a_id)) return;
        const Tensor& dy = g.grad(self);
        const Tensor& y = g.value(self);
        Tensor& ga = g.grad_buffer(a_id);
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += dy(i, j) * y(i, j);
            for (std::size_t j = 0; j < c; ++j) ga(i, j) += y(i, j) * (dy(i, j) - dot);
        }
    });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
    const std::size_t r = x.rows(), c = x.cols();
    if (gamma.value().size() != c || beta.value().size() != c) {
        throw ShapeError("layer_norm_rows: affine params must have " + std::to_string(c) + " elements");
    }
    const Tensor& xv = x.value();
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    Tensor out(x.shape());
    // aux: [r x (c + 1)] normalized values followed by 1/sigma
    Tensor aux(shape2(r, c + 1));
    for (std::size_t i = 0; i < r; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += xv(i, j);
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (xv(i, j) - mu) * (xv(i, j) - mu);
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) {
            const double xhat = (xv(i, j) - mu) * inv;
            aux(i, j) = xhat;
            out(i, j) = gv[j] * xhat + bv[j];
        }
        aux(i, c) = inv;
    }
    return x.graph->record(
        "layer_norm_rows", {x, gamma, beta}, std::move(out),
        [x_id = x.id, g_id = gamma.id, b_id = beta.id, r, c](Graph& g, std::size_t self) {
            const Tensor& dy = g.grad(self);
            const Tensor& aux = g.aux(self);
            const Tensor& gv = g.value(g_id);
            if (g.requires_grad(g_id)) {
                Tensor& gg = g.grad_buffer(g_id);
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < c; ++j) gg[j] += dy(i, j) * aux(i, j);
                }
            }
            if (g.requires_grad(b_id)) {
                Tensor& gb = g.grad_buffer(b_id);
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < c; ++j) gb[j] += dy(i, j);
                }
            }
            if (g.requires_grad(x_id)) {
                Tensor& gx = g.grad_buffer(x_id);
                const double n = static_cast<double>(c);
                for (std::size_t i = 0; i < r; ++i) {
                    double sum_d = 0.0, sum_dx = 0.0;
                    for (std::size_t j = 0; j < c; ++j) {
                        const double d = dy(i, j) * gv[j];
                        sum_d += d;
                        sum_dx += d * aux(i, j);
                    }
                    const double inv = aux(i, c);
                    for (std::size_t j = 0; j < c; ++j) {
                        const double d = dy(i, j) * gv[j];
                        gx(i, j) += inv * (d - sum_d / n - aux(i, j) * sum_dx / n);
                    }
                }
            }
        },
        std::move(aux));
}

Var take_rows(Var x, std::size_t stride, std::size_t offset) {
    const std::size_t r = x.rows(), c = x.cols();
    if (stride == 0 || offset >= stride || r % stride != 0) {
        throw ShapeError("take_rows: stride " + std::to_string(stride) + " offset " + std::to_string(offset) +
                         " on " + std::to_string(r) + " rows");
    }
    const std::size_t n = r / stride;
    Tensor out(shape2(n, c));
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = x.value().row(i * stride + offset);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return x.graph->record("take_rows", {x}, std::move(out), [x_id = x.id, stride, offset, n, c](Graph& g, std::size_t self) {
        if (!g.requires_grad(x_id)) return;
        const Tensor& dy = g.grad(self);
        Tensor& gx = g.grad_buffer(x_id);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) gx(i * stride + offset, j) += dy(i, j);
        }
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return a.graph->record("sum", {a}, Tensor::scalar(s), [a_id = a.id](Graph& g, std::size_t self) {
        const double d = g.grad(self)[0];
        accumulate_into(g, a_id, [&](std::size_t) { return d; });
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    return scale(sum(a), 1.0 / n);
}

Var mse_loss(Var pred, Var target) {
    require_same(pred, target, "mse_loss");
    return mean(square(sub(pred, target)));
}

Var mae_loss(Var pred, Var target) {
    require_same(pred, target, "mae_loss");
    const std::size_t n = pred.value().size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(pred.value()[i] - target.value()[i]);
    s /= static_cast<double>(n);
    return pred.graph->record("mae_loss", {pred, target}, Tensor::scalar(s), [p_id = pred.id, t_id = target.id, n](Graph& g, std::size_t self) {
        const double d = g.grad(self)[0] / static_cast<double>(n);
        const Tensor& pv = g.value(p_id);
        const Tensor& tv = g.value(t_id);
        auto sign = [&](std::size_t i) {
            const double e = pv[i] - tv[i];
            return e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
        };
        accumulate_into(g, p_id, [&](std::size_t i) { return d * sign(i); });
        accumulate_into(g, t_id, [&](std::size_t i) { return -d * sign(i); });
    });
}

Var attention(Var q, Var k, Var v, std::size_t seq, std::size_t heads) {
    require_same(q, k, "attention");
    require_same(q, v, "attention");
    const std::size_t width = q.cols();
    if (seq == 0 || heads == 0 || q.rows() % seq != 0 || width % heads != 0) {
        throw ShapeError("attention: " + shape_string(q.shape()) + " with seq " + std::to_string(seq) + ", heads " +
                         std::to_string(heads));
    }
    const kernels::AttentionDims dims{q.rows() / seq, seq, heads, width / heads};
    const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dims.head_dim));
    Tensor out(q.shape());
    Tensor weights(shape2(dims.batch * heads * seq, seq));
    kernels::attention_forward(q.value().data(), k.value().data(), v.value().data(), out.data(), weights.data(), dims,
                               scale_factor);
    if (!weights.all_finite()) throw NumericError("attention: non-finite attention weights");
    return q.graph->record(
        "attention", {q, k, v}, std::move(out),
        [q_id = q.id, k_id = k.id, v_id = v.id, dims, scale_factor](Graph& g, std::size_t self) {
            // The kernel writes all three gradients; route unused ones to scratch.
            Tensor scratch;
            auto target = [&](std::size_t id) -> double* {
                if (g.requires_grad(id)) return g.grad_buffer(id).data();
                if (scratch.empty()) scratch = Tensor(g.value(id).shape());
                return scratch.data();
            };
            double* dq = target(q_id);
            double* dk = target(k_id);
            double* dv = target(v_id);
            kernels::attention_backward(g.value(q_id).data(), g.value(k_id).data(), g.value(v_id).data(),
                                        g.aux(self).data(), g.grad(self).data(), dq, dk, dv, dims, scale_factor);
        },
        std::move(weights));
}

}  // namespace bttf::num
