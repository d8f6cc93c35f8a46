// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "../oracles.hpp"
#include "../test_util.hpp"
#include "bttf/error.hpp"
#include "bttf/gbt.hpp"
#include "bttf/kernels.hpp"

using namespace bttf;
using namespace bttf::gbt;
using num::Tensor;

namespace {

GBTConfig plain(std::size_t rounds = 1, std::size_t depth = 6) {
    GBTConfig c;
    c.n_rounds = rounds;
    c.max_depth = depth;
    c.eta = 1.0;
    c.reg_l1 = 0.0;
    c.reg_l2 = 0.0;
    return c;
}

Tensor column(std::initializer_list<double> v) {
    Tensor t(v.size(), 1);
    std::size_t i = 0;
    for (double x : v) t(i++, 0) = x;
    return t;
}

}  // namespace

TEST_CASE("gradient and hessian of the squared loss") {
    auto gh = grad_hess_squared(std::vector<double>{3.0, 1.0, -2.0}, std::vector<double>{1.0, 1.0, 0.5});
    CHECK(gh.g == std::vector<double>{2.0, 0.0, -2.5});
    CHECK(gh.h == std::vector<double>{1.0, 1.0, 1.0});
    CHECK_THROWS_AS(grad_hess_squared(std::vector<double>{1.0}, std::vector<double>{}), ShapeError);
}

TEST_CASE("leaf weight examples") {
    CHECK(leaf_weight(0.0, 3.0, 1.0, 0.0) == 0.0);
    // targets {3, 5} at prediction 0: g = {-3, -5}
    CHECK(leaf_weight(-8.0, 2.0, 0.0, 0.0) == doctest::Approx(4.0));
    CHECK(oracle::grid_leaf_weight(-8.0, 2.0, 0.0, 0.0) == doctest::Approx(4.0).epsilon(1e-3));
    CHECK(leaf_weight(-8.0, 2.0, 1.0, 0.0) == doctest::Approx(3.5));
    CHECK(oracle::grid_leaf_weight(-8.0, 2.0, 1.0, 0.0) == doctest::Approx(3.5).epsilon(1e-3));
    CHECK(leaf_weight(0.5, 2.0, 1.0, 0.0) == 0.0);
    CHECK_THROWS_AS(leaf_weight(1.0, 0.0, 0.0, 0.0), NumericError);
    CHECK_THROWS_AS(leaf_weight(1.0, -1.0, 0.0, 5.0), NumericError);
}

TEST_CASE("leaf weight matches grid minimization on random statistics") {
    num::Rng rng(12);
    for (int i = 0; i < 200; ++i) {
        const double G = rng.uniform(-20, 20), H = rng.uniform(0.5, 30);
        const double l1 = rng.uniform(0, 5), l2 = rng.uniform(0, 3);
        CHECK(std::abs(leaf_weight(G, H, l1, l2) - oracle::grid_leaf_weight(G, H, l1, l2)) < 1e-3);
        CHECK(leaf_score(G, H, l1, l2) == doctest::Approx(-oracle::min_leaf_objective(G, H, l1, l2)).epsilon(1e-12));
    }
}

TEST_CASE("split gain contract") {
    const auto r = split_gain({10.0, 4.0}, {0.0, 2.0}, {10.0, 2.0}, 0.0, 0.0, 0.0);
    CHECK(r.gain == doctest::Approx(100.0 / 4 - 100.0 / 8));
    CHECK(r.accepted);
    CHECK_FALSE(split_gain({10.0, 4.0}, {0.0, 2.0}, {10.0, 2.0}, 0.0, 0.0, 20.0).accepted);
    CHECK_THROWS_AS(split_gain({10.0, 4.0}, {1.0, 2.0}, {10.0, 2.0}, 0.0, 0.0, 0.0), ShapeError);
    const auto zero = split_gain({4.0, 4.0}, {2.0, 2.0}, {2.0, 2.0}, 0.0, 0.0, 0.0);
    CHECK(zero.gain == doctest::Approx(0.0));
    CHECK_FALSE(zero.accepted);
}

TEST_CASE("best split on the step example") {
    const Tensor x = column({0, 0, 1, 1});
    const std::vector<double> g = {0, 0, -10, -10}, h(4, 1.0);
    std::vector<std::size_t> rows = {0, 1, 2, 3};
    const auto best = find_best_split(x, rows, g, h, plain());
    REQUIRE(best.found);
    CHECK(best.feature == 0);
    CHECK(best.threshold == 0.5);
    CHECK(best.gain > 0.0);
    // order of presentation does not matter
    std::vector<std::size_t> shuffled = {3, 0, 2, 1};
    const auto again = find_best_split(x, shuffled, g, h, plain());
    CHECK(again.gain == best.gain);
    CHECK(again.threshold == best.threshold);
}

TEST_CASE("constant targets give a single leaf") {
    Tensor x(10, 2);
    for (std::size_t i = 0; i < 10; ++i) {
        x(i, 0) = static_cast<double>(i);
        x(i, 1) = static_cast<double>(i % 3);
    }
    const auto fit = fit_gbt(x, std::vector<double>(10, 4.0), plain(3));
    for (const auto& t : fit.model.trees) CHECK(t.nodes.size() == 1);
    CHECK(fit.model.predict(std::vector<double>{3.0, 1.0}) == 4.0);
}

TEST_CASE("root split equals brute force on small random instances") {
    num::Rng rng(77);
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t n = 2 + rng.below(63), d = 1 + rng.below(4);
        Tensor x(n, d);
        oracle::Matrix xm(n, std::vector<double>(d));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                // coarse grid so duplicate values occur
                xm[i][j] = x(i, j) = std::round(rng.uniform(0, 10) * 2.0) / 2.0;
            }
        std::vector<double> y(n);
        for (auto& v : y) v = rng.normal() * 3.0 + (xm[&v - y.data()][0] > 5 ? 2.0 : 0.0);
        GBTConfig cfg = plain(1, 1);
        cfg.reg_l1 = rng.uniform(0, 2);
        cfg.reg_l2 = rng.uniform(0, 1);
        cfg.min_leaf = 1 + rng.below(3);
        const auto fit = fit_gbt(x, y, cfg);
        const double base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
        std::vector<double> g(n), h(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) g[i] = base - y[i];
        const auto brute = oracle::brute_force_split(xm, g, h, cfg.reg_l1, cfg.reg_l2, cfg.min_gain, cfg.min_leaf);
        const auto& root = fit.model.trees[0].nodes[0];
        INFO("instance " << inst);
        CHECK(root.is_leaf() == !brute.found);
        if (!brute.found || root.is_leaf()) continue;
        CHECK(root.gain == doctest::Approx(brute.gain).epsilon(1e-9));
        if (brute.gain - brute.runner_up > 1e-9 * std::max(1.0, brute.gain)) {
            CHECK(static_cast<std::size_t>(root.feature) == brute.feature);
            for (std::size_t i = 0; i < n; ++i) CHECK((xm[i][brute.feature] <= root.threshold) == brute.left[i]);
        }
    }
}

TEST_CASE("serial and parallel split search agree") {
    const int saved = kernels::threads();
    kernels::set_threads(4);
    num::Rng rng(31);
    Tensor x(3000, 12);
    for (double& v : x.values()) v = rng.normal();
    std::vector<double> g(3000), h(3000, 1.0);
    for (auto& v : g) v = rng.normal();
    std::vector<std::size_t> rows(3000);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto sorted = sort_rows(x, rows);
    const auto a = serial::find_best_split(x, sorted, g, h, plain());
    const auto b = omp::find_best_split(x, sorted, g, h, plain());
    CHECK(a.found == b.found);
    CHECK(a.feature == b.feature);
    CHECK(a.threshold == b.threshold);
    CHECK(a.gain == b.gain);

    const auto fit = fit_gbt(x, g, GBTConfig{});
    CHECK(serial::predict_batch(fit.model, x) == omp::predict_batch(fit.model, x));
    kernels::set_threads(saved);
}

TEST_CASE("tie-breaking prefers the lowest feature, then the lowest threshold") {
    // columns 0 and 1 identical: same gain, feature 0 must win
    Tensor x(6, 2);
    for (std::size_t i = 0; i < 6; ++i) x(i, 0) = x(i, 1) = static_cast<double>(i);
    const std::vector<double> g = {1, 1, 1, -1, -1, -1}, h(6, 1.0);
    std::vector<std::size_t> rows = {0, 1, 2, 3, 4, 5};
    auto best = find_best_split(x, rows, g, h, plain());
    CHECK(best.feature == 0);
    CHECK(best.threshold == 2.5);
    // symmetric residuals: cuts after index 0 and index 4 tie, the lower threshold wins
    const std::vector<double> g2 = {5, 0, 0, 0, 0, 5};
    best = find_best_split(x, rows, g2, h, plain());
    CHECK(best.threshold == 0.5);
}

TEST_CASE("unlimited depth isolates unique rows") {
    num::Rng rng(8);
    Tensor x(40, 2);
    for (double& v : x.values()) v = rng.normal();
    std::vector<double> y(40);
    for (auto& v : y) v = rng.normal();
    const auto fit = fit_gbt(x, y, plain(1, 0));
    double mse = 0.0;
    for (std::size_t i = 0; i < 40; ++i) mse += std::pow(fit.model.predict(x.row(i)) - y[i], 2);
    CHECK(mse / 40 < 1e-20);
    CHECK(fit.model.trees[0].leaves() == 40);
}

TEST_CASE("depth one round reproduces group means") {
    const Tensor x = column({1, 2, 3, 10, 11, 12, 13});
    const std::vector<double> y = {1.0, 2.0, 4.0, 10.0, 12.0, 11.0, 15.0};
    const auto fit = fit_gbt(x, y, plain(1, 1));
    const auto& tree = fit.model.trees[0];
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[0].threshold == 6.5);
    const double left_mean = (1.0 + 2.0 + 4.0) / 3.0, right_mean = (10.0 + 12.0 + 11.0 + 15.0) / 4.0;
    CHECK(fit.model.predict(std::vector<double>{2.0}) == doctest::Approx(left_mean).epsilon(1e-12));
    CHECK(fit.model.predict(std::vector<double>{12.0}) == doctest::Approx(right_mean).epsilon(1e-12));
}

TEST_CASE("training objective is non-increasing") {
    num::Rng rng(90);
    for (int ds = 0; ds < 10; ++ds) {
        Tensor x(80, 3);
        for (double& v : x.values()) v = rng.uniform(-2, 2);
        std::vector<double> y(80);
        for (std::size_t i = 0; i < 80; ++i) y[i] = std::sin(2 * x(i, 0)) + x(i, 1) * x(i, 2) + 0.3 * rng.normal();
        GBTConfig cfg;
        cfg.n_rounds = 30;
        cfg.eta = rng.uniform(0.05, 1.0);
        cfg.reg_l1 = rng.uniform(0, 3);
        cfg.reg_l2 = rng.uniform(0, 2);
        cfg.max_depth = 1 + rng.below(6);
        const auto fit = fit_gbt(x, y, cfg);
        REQUIRE(fit.objective.size() == 31);
        for (std::size_t r = 1; r < fit.objective.size(); ++r) CHECK(fit.objective[r] <= fit.objective[r - 1]);
    }
}

TEST_CASE("prediction follows a hand-traced path") {
    BoostedTreeModel m;
    m.config.eta = 0.5;
    m.base_score = 1.0;
    m.feature_names = {"f0", "f1"};
    RegressionTree t;
    TreeNode root;
    root.feature = 1;
    root.threshold = 2.0;
    root.left = 1;
    root.right = 2;
    TreeNode a, b;
    a.weight = -4.0;
    b.weight = 6.0;
    t.nodes = {root, a, b};
    m.trees = {t};
    CHECK(m.predict(std::vector<double>{100.0, 2.0}) == 1.0 + 0.5 * -4.0);  // ties go left
    CHECK(m.predict(std::vector<double>{100.0, 2.5}) == 1.0 + 0.5 * 6.0);
    CHECK_THROWS_AS(m.predict(std::vector<double>{1.0}), ShapeError);

    RegressionTree zero;
    zero.nodes = {TreeNode{}};
    m.trees = {zero, zero};
    CHECK(m.predict(std::vector<double>{0.0, 0.0}) == 1.0);
}

TEST_CASE("feature importance counts splits") {
    BoostedTreeModel m;
    m.feature_names = {"a", "b", "c"};
    RegressionTree t;
    TreeNode root;
    root.feature = 2;
    root.left = 1;
    root.right = 2;
    t.nodes = {root, TreeNode{}, TreeNode{}};
    m.trees = {t};
    auto fi = feature_importance(m);
    CHECK(fi.fscore == std::vector<std::size_t>{0, 0, 1});
    CHECK(fi.ranking() == std::vector<std::size_t>{2, 0, 1});

    num::Rng rng(2);
    Tensor x(50, 3);
    for (double& v : x.values()) v = rng.normal();
    std::vector<double> y(50);
    for (auto& v : y) v = rng.normal();
    const auto stumps = fit_gbt(x, y, plain(7, 1)).model;
    fi = feature_importance(stumps);
    CHECK(std::accumulate(fi.fscore.begin(), fi.fscore.end(), std::size_t{0}) == 7);
}

TEST_CASE("model json round-trips bitwise and malformed input is rejected") {
    num::Rng rng(3);
    Tensor x(100, 4);
    for (double& v : x.values()) v = rng.normal();
    std::vector<double> y(100);
    for (auto& v : y) v = rng.normal();
    const auto m = fit_gbt(x, y, GBTConfig{}).model;
    const auto dir = testutil::scratch("gbt");
    m.save(dir / "m.json");
    const auto back = BoostedTreeModel::load(dir / "m.json");
    CHECK(back == m);
    back.save(dir / "m2.json");
    CHECK(testutil::read_file(dir / "m.json") == testutil::read_file(dir / "m2.json"));
    CHECK(back.predict_batch(x) == m.predict_batch(x));

    auto j = m.to_json();
    j["trees"][0]["nodes"][0]["left"] = 0;
    CHECK_THROWS_AS(BoostedTreeModel::from_json(j), DataError);
    CHECK_THROWS_AS(BoostedTreeModel::from_json({{"format", "nope"}}), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("fit input contracts") {
    CHECK_THROWS_AS(fit_gbt(column({1.0}), std::vector<double>{1.0}, GBTConfig{}), DataError);
    CHECK_THROWS_AS(fit_gbt(column({1.0, NAN}), std::vector<double>{1.0, 2.0}, GBTConfig{}), DataError);
    CHECK_THROWS_AS(fit_gbt(column({1.0, 2.0}), std::vector<double>{1.0, INFINITY}, GBTConfig{}), DataError);
    CHECK_THROWS_AS(fit_gbt(column({1.0, 2.0}), std::vector<double>{1.0}, GBTConfig{}), ShapeError);
    GBTConfig bad;
    bad.eta = 0.0;
    bad.n_rounds = 0;
    CHECK(validate(bad).size() == 2);
    CHECK_THROWS_AS(fit_gbt(column({1.0, 2.0}), std::vector<double>{1.0, 2.0}, bad), ConfigError);
    CHECK(gbt_config_from_json(to_json(GBTConfig{})) == GBTConfig{});
}
