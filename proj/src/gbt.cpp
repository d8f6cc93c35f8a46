// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include "bttf/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "bttf/error.hpp"
#include "bttf/kernels.hpp"

namespace bttf::gbt {

using num::Tensor;

std::vector<std::string> validate(const GBTConfig& cfg) {
    std::vector<std::string> issues;
    if (cfg.n_rounds < 1) issues.push_back("gbt.n_rounds: must be at least 1");
    if (!(cfg.eta > 0.0 && cfg.eta <= 1.0)) issues.push_back("gbt.eta: must lie in (0, 1]");
    if (!(cfg.reg_l1 >= 0.0) || !std::isfinite(cfg.reg_l1)) issues.push_back("gbt.reg_l1: must be >= 0");
    if (!(cfg.reg_l2 >= 0.0) || !std::isfinite(cfg.reg_l2)) issues.push_back("gbt.reg_l2: must be >= 0");
    if (!std::isfinite(cfg.min_gain)) issues.push_back("gbt.min_gain: must be finite");
    if (cfg.min_leaf < 1) issues.push_back("gbt.min_leaf: must be at least 1");
    return issues;
}

nlohmann::json to_json(const GBTConfig& cfg) {
    return {{"n_rounds", cfg.n_rounds}, {"max_depth", cfg.max_depth}, {"eta", cfg.eta},
            {"reg_l1", cfg.reg_l1},     {"reg_l2", cfg.reg_l2},       {"min_gain", cfg.min_gain},
            {"min_leaf", cfg.min_leaf}, {"seed", cfg.seed}};
}

GBTConfig gbt_config_from_json(const nlohmann::json& j, GBTConfig c) {
    c.n_rounds = j.value("n_rounds", c.n_rounds);
    c.max_depth = j.value("max_depth", c.max_depth);
    c.eta = j.value("eta", c.eta);
    c.reg_l1 = j.value("reg_l1", c.reg_l1);
    c.reg_l2 = j.value("reg_l2", c.reg_l2);
    c.min_gain = j.value("min_gain", c.min_gain);
    c.min_leaf = j.value("min_leaf", c.min_leaf);
    c.seed = j.value("seed", c.seed);
    return c;
}

GradHess grad_hess_squared(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) {
        throw ShapeError("grad_hess_squared: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(target.size()) + " targets");
    }
    GradHess gh{std::vector<double>(pred.size()), std::vector<double>(pred.size(), 1.0)};
    for (std::size_t i = 0; i < pred.size(); ++i) gh.g[i] = pred[i] - target[i];
    return gh;
}

namespace {

double shrink(double G, double l1) { return std::max(std::abs(G) - l1, 0.0); }

double score_unchecked(double G, double H, double l1, double l2) {
    const double t = shrink(G, l1);
    return t * t / (2.0 * (H + l2));
}

}  // namespace

double leaf_weight(double G, double H, double reg_l1, double reg_l2) {
    if (!(H > 0.0)) throw NumericError("degenerate leaf: hessian sum " + std::to_string(H) + " is not positive");
    const double t = shrink(G, reg_l1);
    if (t == 0.0) return 0.0;
    return (G > 0.0 ? -t : t) / (H + reg_l2);
}

double leaf_score(double G, double H, double reg_l1, double reg_l2) {
    if (!(H > 0.0)) throw NumericError("degenerate leaf: hessian sum " + std::to_string(H) + " is not positive");
    return score_unchecked(G, H, reg_l1, reg_l2);
}

GainResult split_gain(NodeStats parent, NodeStats left, NodeStats right, double reg_l1, double reg_l2,
                      double min_gain) {
    auto close = [](double a, double b, double c) {
        return std::abs(a + b - c) <= 1e-9 * (std::abs(a) + std::abs(b) + std::abs(c) + 1.0);
    };
    if (!close(left.G, right.G, parent.G) || !close(left.H, right.H, parent.H)) {
        throw ShapeError("split_gain: child statistics do not sum to the parent");
    }
    const double gain = leaf_score(left.G, left.H, reg_l1, reg_l2) + leaf_score(right.G, right.H, reg_l1, reg_l2) -
                        leaf_score(parent.G, parent.H, reg_l1, reg_l2);
    return {gain, gain > min_gain};
}

std::size_t RegressionTree::leaf_index(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return i;
}

std::size_t RegressionTree::leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
}

std::size_t RegressionTree::depth() const {
    if (nodes.empty()) return 0;
    std::size_t deepest = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes[i].is_leaf()) {
            stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
            stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
        }
    }
    return deepest;
}

SortedRows sort_rows(const Tensor& x, std::span<const std::size_t> rows) {
    SortedRows sorted(x.cols(), std::vector<std::size_t>(rows.begin(), rows.end()));
    for (std::size_t f = 0; f < x.cols(); ++f) {
        std::stable_sort(sorted[f].begin(), sorted[f].end(),
                         [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
    }
    return sorted;
}

namespace {

NodeStats node_stats(std::span<const std::size_t> rows, std::span<const double> g, std::span<const double> h) {
    NodeStats s;
    for (std::size_t r : rows) {
        s.G += g[r];
        s.H += h[r];
    }
    return s;
}

// Best threshold on one feature; strict improvement keeps the lowest threshold.
SplitCandidate scan_feature(const Tensor& x, std::size_t f, std::span<const std::size_t> rows,
                            std::span<const double> g, std::span<const double> h, NodeStats parent,
                            const GBTConfig& cfg) {
    SplitCandidate best;
    best.feature = f;
    const std::size_t n = rows.size();
    const double parent_score = score_unchecked(parent.G, parent.H, cfg.reg_l1, cfg.reg_l2);
    NodeStats left;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        left.G += g[rows[i]];
        left.H += h[rows[i]];
        const double lo = x(rows[i], f), hi = x(rows[i + 1], f);
        if (!(lo < hi)) continue;
        const std::size_t n_left = i + 1, n_right = n - n_left;
        if (n_left < cfg.min_leaf || n_right < cfg.min_leaf) continue;
        const NodeStats right{parent.G - left.G, parent.H - left.H};
        if (!(left.H > 0.0) || !(right.H > 0.0)) continue;
        const double gain = score_unchecked(left.G, left.H, cfg.reg_l1, cfg.reg_l2) +
                            score_unchecked(right.G, right.H, cfg.reg_l1, cfg.reg_l2) - parent_score;
        if (!(gain > cfg.min_gain)) continue;
        if (!best.found || gain > best.gain) {
            double t = lo + (hi - lo) / 2.0;
            if (!(t < hi)) t = lo;
            best = {true, f, t, gain, left, right, n_left, n_right};
        }
    }
    return best;
}

SplitCandidate reduce(std::span<const SplitCandidate> per_feature) {
    SplitCandidate best;
    for (const auto& c : per_feature) {
        if (c.found && (!best.found || c.gain > best.gain)) best = c;
    }
    return best;
}

void check_node(const Tensor& x, const SortedRows& sorted, std::span<const double> g, std::span<const double> h) {
    if (sorted.size() != x.cols()) throw ShapeError("find_best_split: one sorted row list per feature expected");
    if (g.size() != x.rows() || h.size() != x.rows()) throw ShapeError("find_best_split: g/h length != rows");
}

constexpr std::size_t kParallelWork = 1 << 14;

}  // namespace

namespace serial {

SplitCandidate find_best_split(const Tensor& x, const SortedRows& sorted, std::span<const double> g,
                               std::span<const double> h, const GBTConfig& cfg) {
    check_node(x, sorted, g, h);
    if (sorted.empty() || sorted[0].size() < 2) return {};
    const NodeStats parent = node_stats(sorted[0], g, h);
    std::vector<SplitCandidate> per_feature(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) per_feature[f] = scan_feature(x, f, sorted[f], g, h, parent, cfg);
    return reduce(per_feature);
}

std::vector<double> predict_batch(const BoostedTreeModel& model, const Tensor& x) {
    if (x.cols() != model.n_features()) {
        throw ShapeError("predict: " + std::to_string(x.cols()) + " features, model expects " +
                         std::to_string(model.n_features()));
    }
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = model.predict(x.row(i));
    return out;
}

}  // namespace serial

namespace omp {

SplitCandidate find_best_split(const Tensor& x, const SortedRows& sorted, std::span<const double> g,
                               std::span<const double> h, const GBTConfig& cfg) {
    check_node(x, sorted, g, h);
    if (sorted.empty() || sorted[0].size() < 2) return {};
    const NodeStats parent = node_stats(sorted[0], g, h);
    std::vector<SplitCandidate> per_feature(x.cols());
    const auto features = static_cast<std::ptrdiff_t>(x.cols());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::threads())
    for (std::ptrdiff_t f = 0; f < features; ++f) {
        const auto fu = static_cast<std::size_t>(f);
        per_feature[fu] = scan_feature(x, fu, sorted[fu], g, h, parent, cfg);
    }
    return reduce(per_feature);
}

std::vector<double> predict_batch(const BoostedTreeModel& model, const Tensor& x) {
    if (x.cols() != model.n_features()) {
        throw ShapeError("predict: " + std::to_string(x.cols()) + " features, model expects " +
                         std::to_string(model.n_features()));
    }
    std::vector<double> out(x.rows());
    const auto rows = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static) num_threads(kernels::threads())
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        out[static_cast<std::size_t>(i)] = model.predict(x.row(static_cast<std::size_t>(i)));
    }
    return out;
}

}  // namespace omp

SplitCandidate find_best_split(const Tensor& x, const SortedRows& sorted, std::span<const double> g,
                               std::span<const double> h, const GBTConfig& cfg) {
    const std::size_t n = sorted.empty() ? 0 : sorted[0].size();
    if (kernels::threads() > 1 && x.cols() > 1 && n * x.cols() >= kParallelWork) {
        return omp::find_best_split(x, sorted, g, h, cfg);
    }
    return serial::find_best_split(x, sorted, g, h, cfg);
}

SplitCandidate find_best_split(const Tensor& x, std::span<const std::size_t> rows, std::span<const double> g,
                               std::span<const double> h, const GBTConfig& cfg) {
    return find_best_split(x, sort_rows(x, rows), g, h, cfg);
}

double BoostedTreeModel::predict(std::span<const double> x) const {
    if (x.size() != n_features()) {
        throw ShapeError("predict: " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(n_features()));
    }
    double p = base_score;
    for (const auto& t : trees) p += config.eta * t.predict(x);
    return p;
}

std::vector<double> BoostedTreeModel::predict_batch(const Tensor& x) const {
    if (kernels::threads() > 1 && x.rows() * trees.size() >= kParallelWork) return omp::predict_batch(*this, x);
    return serial::predict_batch(*this, x);
}

nlohmann::json BoostedTreeModel::to_json() const {
    nlohmann::json trees_json = nlohmann::json::array();
    for (const auto& t : trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes) {
            nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
                             {"right", n.right},     {"weight", n.weight},       {"gain", n.gain},
                             {"cover", n.cover},     {"count", n.count}});
        }
        trees_json.push_back({{"nodes", std::move(nodes)}});
    }
    return {{"format", "bttf-gbt-v1"},
            {"config", gbt::to_json(config)},
            {"base_score", base_score},
            {"feature_names", feature_names},
            {"trees", std::move(trees_json)}};
}

BoostedTreeModel BoostedTreeModel::from_json(const nlohmann::json& j) {
    if (j.value("format", std::string()) != "bttf-gbt-v1") throw DataError("not a bttf-gbt-v1 model");
    BoostedTreeModel m;
    try {
        m.config = gbt_config_from_json(j.at("config"));
        m.base_score = j.at("base_score").get<double>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        for (const auto& tj : j.at("trees")) {
            RegressionTree t;
            for (const auto& nj : tj.at("nodes")) {
                TreeNode n;
                n.feature = nj.at("feature").get<int>();
                n.threshold = nj.at("threshold").get<double>();
                n.left = nj.at("left").get<int>();
                n.right = nj.at("right").get<int>();
                n.weight = nj.at("weight").get<double>();
                n.gain = nj.at("gain").get<double>();
                n.cover = nj.at("cover").get<double>();
                n.count = nj.at("count").get<std::size_t>();
                t.nodes.push_back(n);
            }
            m.trees.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed gbt model: ") + e.what());
    }
    // reject trees that could loop or index out of range
    for (const auto& t : m.trees) {
        if (t.nodes.empty()) throw DataError("malformed gbt model: empty tree");
        for (std::size_t i = 0; i < t.nodes.size(); ++i) {
            const auto& n = t.nodes[i];
            if (n.is_leaf()) continue;
            const auto size = static_cast<int>(t.nodes.size());
            if (static_cast<std::size_t>(n.feature) >= m.feature_names.size() || n.left <= static_cast<int>(i) ||
                n.right <= static_cast<int>(i) || n.left >= size || n.right >= size) {
                throw DataError("malformed gbt model: bad node " + std::to_string(i));
            }
        }
    }
    return m;
}

void BoostedTreeModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << to_json().dump(1) << '\n';
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

BoostedTreeModel BoostedTreeModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

double training_objective(std::span<const double> pred, std::span<const double> target,
                          const BoostedTreeModel& model) {
    if (pred.size() != target.size() || pred.empty()) throw ShapeError("training_objective: length mismatch");
    double se = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) se += (pred[i] - target[i]) * (pred[i] - target[i]);
    double l1 = 0.0;
    for (const auto& t : model.trees) {
        for (const auto& n : t.nodes) {
            if (n.is_leaf()) l1 += std::abs(model.config.eta * n.weight);
        }
    }
    const auto N = static_cast<double>(pred.size());
    return se / N + 2.0 * model.config.reg_l1 * l1 / N;
}

namespace {

struct Grower {
    const Tensor& x;
    std::span<const double> g;
    std::span<const double> h;
    const GBTConfig& cfg;
    RegressionTree tree;

    int grow(const SortedRows& sorted, std::size_t depth) {
        const auto& rows = sorted[0];
        const NodeStats s = node_stats(rows, g, h);
        const auto id = static_cast<int>(tree.nodes.size());
        TreeNode node;
        node.weight = leaf_weight(s.G, s.H, cfg.reg_l1, cfg.reg_l2);
        node.cover = s.H;
        node.count = rows.size();
        tree.nodes.push_back(node);

        const bool depth_ok = cfg.max_depth == 0 || depth < cfg.max_depth;
        if (!depth_ok || rows.size() < 2 * cfg.min_leaf) return id;
        const SplitCandidate best = find_best_split(x, sorted, g, h, cfg);
        if (!best.found) return id;

        SortedRows left(sorted.size()), right(sorted.size());
        for (std::size_t f = 0; f < sorted.size(); ++f) {
            left[f].reserve(best.n_left);
            right[f].reserve(best.n_right);
            for (std::size_t r : sorted[f]) (x(r, best.feature) <= best.threshold ? left[f] : right[f]).push_back(r);
        }
        auto& n = tree.nodes[static_cast<std::size_t>(id)];
        n.feature = static_cast<int>(best.feature);
        n.threshold = best.threshold;
        n.gain = best.gain;
        const int l = grow(left, depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].left = l;
        const int r = grow(right, depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

}  // namespace

FitResult fit_gbt(const Tensor& x, std::span<const double> y, const GBTConfig& cfg,
                  std::vector<std::string> feature_names, const RoundCallback& on_round) {
    if (auto issues = validate(cfg); !issues.empty()) {
        std::string msg = "invalid gbt config:";
        for (const auto& i : issues) msg += "\n  " + i;
        throw ConfigError(msg);
    }
    if (x.rows() != y.size()) {
        throw ShapeError("fit_gbt: " + std::to_string(x.rows()) + " rows vs " + std::to_string(y.size()) + " targets");
    }
    if (y.size() < 2) throw DataError("fit_gbt: at least 2 samples are required");
    if (x.cols() < 1) throw DataError("fit_gbt: no features");
    if (!x.all_finite()) throw DataError("fit_gbt: non-finite feature value");
    for (double v : y) {
        if (!std::isfinite(v)) throw DataError("fit_gbt: non-finite target value");
    }
    if (feature_names.empty()) {
        for (std::size_t f = 0; f < x.cols(); ++f) feature_names.push_back("f" + std::to_string(f));
    }
    if (feature_names.size() != x.cols()) throw ShapeError("fit_gbt: feature name count != columns");

    FitResult result;
    auto& m = result.model;
    m.config = cfg;
    m.feature_names = std::move(feature_names);
    m.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

    std::vector<double> pred(y.size(), m.base_score);
    result.objective.push_back(training_objective(pred, y, m));
    std::vector<std::size_t> all(y.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const SortedRows root = sort_rows(x, all);

    for (std::size_t round = 1; round <= cfg.n_rounds; ++round) {
        const GradHess gh = grad_hess_squared(pred, y);
        Grower grower{x, gh.g, gh.h, cfg, {}};
        grower.grow(root, 0);
        for (std::size_t i = 0; i < y.size(); ++i) pred[i] += cfg.eta * grower.tree.predict(x.row(i));
        m.trees.push_back(std::move(grower.tree));
        result.objective.push_back(training_objective(pred, y, m));
        if (on_round) on_round(round, result.objective.back());
    }
    return result;
}

std::vector<std::size_t> FeatureImportance::ranking() const {
    std::vector<std::size_t> order(fscore.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fscore[a] > fscore[b]; });
    return order;
}

FeatureImportance feature_importance(const BoostedTreeModel& model) {
    FeatureImportance fi{model.feature_names, std::vector<std::size_t>(model.n_features(), 0),
                         std::vector<double>(model.n_features(), 0.0)};
    for (const auto& t : model.trees) {
        for (const auto& n : t.nodes) {
            if (n.is_leaf()) continue;
            ++fi.fscore[static_cast<std::size_t>(n.feature)];
            fi.total_gain[static_cast<std::size_t>(n.feature)] += n.gain;
        }
    }
    return fi;
}

}  // namespace bttf::gbt
