// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference computations for tests. Nothing here calls into the
// library's numeric code; each routine is the direct textbook formula.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <set>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b[0].size(); ++j)
            for (std::size_t p = 0; p < b.size(); ++p) c[i][j] += a[i][p] * b[p][j];
    return c;
}

/// Objective of one leaf: G w + 0.5 (H + l2) w^2 + l1 |w|.
inline double leaf_objective(double w, double G, double H, double l1, double l2) {
    return G * w + 0.5 * (H + l2) * w * w + l1 * std::abs(w);
}

/// argmin of leaf_objective on a grid of the given step.
inline double grid_leaf_weight(double G, double H, double l1, double l2, double step = 1e-4) {
    const double radius = std::abs(G) / (H + l2) + 1.0;
    const auto n = static_cast<long>(std::ceil(radius / step));
    double best_w = 0.0, best = leaf_objective(0.0, G, H, l1, l2);
    for (long i = -n; i <= n; ++i) {
        const double w = static_cast<double>(i) * step;
        const double v = leaf_objective(w, G, H, l1, l2);
        if (v < best) {
            best = v;
            best_w = w;
        }
    }
    return best_w;
}

/// Minimum of the piecewise quadratic leaf objective by checking its kink
/// (w = 0) and the stationary point of each smooth piece.
inline double min_leaf_objective(double G, double H, double l1, double l2) {
    double best = 0.0;
    for (double w : {-(G + l1) / (H + l2), -(G - l1) / (H + l2)}) {
        best = std::min(best, leaf_objective(w, G, H, l1, l2));
    }
    return best;
}

struct BruteSplit {
    bool found = false;
    std::size_t feature = 0;
    double cut = 0.0;  // left iff x <= cut, cut is an observed value
    double gain = -std::numeric_limits<double>::infinity();
    double runner_up = -std::numeric_limits<double>::infinity();  // best gain of a different partition
    std::vector<bool> left;
};

/// Exhaustive search over every feature and every observed value as a cut.
/// Gain = objective(parent) - objective(left) - objective(right) at optimal weights.
inline BruteSplit brute_force_split(const Matrix& x, const std::vector<double>& g, const std::vector<double>& h,
                                    double l1, double l2, double min_gain, std::size_t min_leaf) {
    BruteSplit best;
    const std::size_t n = x.size();
    double Gp = 0.0, Hp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Gp += g[i];
        Hp += h[i];
    }
    const double parent = min_leaf_objective(Gp, Hp, l1, l2);
    std::vector<std::vector<bool>> seen;
    for (std::size_t f = 0; f < x[0].size(); ++f) {
        std::set<double> values;
        for (const auto& row : x) values.insert(row[f]);
        for (double cut : values) {
            std::vector<bool> left(n);
            double Gl = 0.0, Hl = 0.0, Gr = 0.0, Hr = 0.0;
            std::size_t nl = 0;
            for (std::size_t i = 0; i < n; ++i) {
                left[i] = x[i][f] <= cut;
                if (left[i]) {
                    Gl += g[i];
                    Hl += h[i];
                    ++nl;
                } else {
                    Gr += g[i];
                    Hr += h[i];
                }
            }
            if (nl < min_leaf || n - nl < min_leaf) continue;
            const double gain = parent - min_leaf_objective(Gl, Hl, l1, l2) - min_leaf_objective(Gr, Hr, l1, l2);
            if (!(gain > min_gain)) continue;
            if (gain > best.gain) {
                if (best.found && best.left != left) best.runner_up = std::max(best.runner_up, best.gain);
                best.found = true;
                best.feature = f;
                best.cut = cut;
                best.gain = gain;
                best.left = left;
            } else if (left != best.left) {
                best.runner_up = std::max(best.runner_up, gain);
            }
        }
    }
    return best;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Two-pass population standard deviation.
inline double population_std(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

/// One-pass RMSE.
inline double rmse(const std::vector<double>& p, const std::vector<double>& t) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i) s += static_cast<long double>(p[i] - t[i]) * (p[i] - t[i]);
    return static_cast<double>(std::sqrt(s / static_cast<long double>(p.size())));
}

/// One-pass R^2 using raw moments in extended precision.
inline double r2(const std::vector<double>& p, const std::vector<double>& t) {
    long double res = 0.0L, st = 0.0L, st2 = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i) {
        res += static_cast<long double>(p[i] - t[i]) * (p[i] - t[i]);
        st += t[i];
        st2 += static_cast<long double>(t[i]) * t[i];
    }
    const long double n = static_cast<long double>(p.size());
    return static_cast<double>(1.0L - res / (st2 - st * st / n));
}

/// Scaled dot-product attention for one head, softmax without max-shift.
inline Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, Matrix* weights = nullptr) {
    const std::size_t s = q.size(), d = q[0].size();
    Matrix w(s, std::vector<double>(s)), out(s, std::vector<double>(v[0].size(), 0.0));
    for (std::size_t i = 0; i < s; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < s; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) dot += q[i][c] * k[j][c];
            w[i][j] = std::exp(dot / std::sqrt(static_cast<double>(d)));
            z += w[i][j];
        }
        for (std::size_t j = 0; j < s; ++j) {
            w[i][j] /= z;
            for (std::size_t c = 0; c < v[0].size(); ++c) out[i][c] += w[i][j] * v[j][c];
        }
    }
    if (weights) *weights = w;
    return out;
}

/// Central finite difference of a scalar function at x along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 std::size_t i, double eps = 1e-6) {
    const double x0 = x[i];
    x[i] = x0 + eps;
    const double up = f(x);
    x[i] = x0 - eps;
    const double down = f(x);
    return (up - down) / (2.0 * eps);
}

}  // namespace oracle
