// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bttf/tensor.hpp"

namespace bttf::gbt {

struct BoostedTreeModel;

struct GBTConfig {
    std::size_t n_rounds = 100;
    std::size_t max_depth = 6;  // 0: unlimited
    double eta = 0.3;
    double reg_l1 = 1.0;
    double reg_l2 = 0.0;
    double min_gain = 0.0;
    std::size_t min_leaf = 1;
    std::uint64_t seed = 42;  // no subsampling is done; kept for the run record

    friend bool operator==(const GBTConfig&, const GBTConfig&) = default;
};

std::vector<std::string> validate(const GBTConfig& cfg);
nlohmann::json to_json(const GBTConfig& cfg);
GBTConfig gbt_config_from_json(const nlohmann::json& j, GBTConfig base = {});

/// Squared loss 0.5 (pred - y)^2: g = pred - y, h = 1.
struct GradHess {
    std::vector<double> g;
    std::vector<double> h;
};
GradHess grad_hess_squared(std::span<const double> pred, std::span<const double> target);

/// argmin_w G w + 0.5 (H + l2) w^2 + l1 |w|. H <= 0: NumericError.
double leaf_weight(double G, double H, double reg_l1, double reg_l2);
/// Objective reduction achieved by the optimal leaf weight.
double leaf_score(double G, double H, double reg_l1, double reg_l2);

struct NodeStats {
    double G = 0.0;
    double H = 0.0;
};

struct GainResult {
    double gain = 0.0;
    bool accepted = false;  // gain > min_gain
};

/// score(left) + score(right) - score(parent). Throws ShapeError when left
/// and right do not add up to the parent.
GainResult split_gain(NodeStats parent, NodeStats left, NodeStats right, double reg_l1, double reg_l2,
                      double min_gain);

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double weight = 0.0;  // leaf weight; for internal nodes the weight the node would have as a leaf
    double gain = 0.0;
    double cover = 0.0;  // sum of hessians
    std::size_t count = 0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Node 0 is the root. x[feature] <= threshold goes left.
struct RegressionTree {
    std::vector<TreeNode> nodes;

    std::size_t leaf_index(std::span<const double> x) const;
    double predict(std::span<const double> x) const { return nodes[leaf_index(x)].weight; }
    std::size_t leaves() const;
    std::size_t depth() const;
    friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

struct SplitCandidate {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
    NodeStats left;
    NodeStats right;
    std::size_t n_left = 0;
    std::size_t n_right = 0;
};

/// Row indices of one node, sorted by value for each feature (ties in row order).
using SortedRows = std::vector<std::vector<std::size_t>>;

SortedRows sort_rows(const num::Tensor& x, std::span<const std::size_t> rows);

/// Best split of a node over all features: exact greedy over sorted unique
/// values, midpoint thresholds, ties to the lowest feature then the lowest
/// threshold. found=false when no candidate beats min_gain or respects min_leaf.
namespace serial {
SplitCandidate find_best_split(const num::Tensor& x, const SortedRows& sorted, std::span<const double> g,
                               std::span<const double> h, const GBTConfig& cfg);
std::vector<double> predict_batch(const BoostedTreeModel& model, const num::Tensor& x);
}  // namespace serial
namespace omp {
SplitCandidate find_best_split(const num::Tensor& x, const SortedRows& sorted, std::span<const double> g,
                               std::span<const double> h, const GBTConfig& cfg);
std::vector<double> predict_batch(const BoostedTreeModel& model, const num::Tensor& x);
}  // namespace omp

SplitCandidate find_best_split(const num::Tensor& x, const SortedRows& sorted, std::span<const double> g,
                               std::span<const double> h, const GBTConfig& cfg);
/// Convenience overload sorting `rows` first.
SplitCandidate find_best_split(const num::Tensor& x, std::span<const std::size_t> rows, std::span<const double> g,
                               std::span<const double> h, const GBTConfig& cfg);

struct BoostedTreeModel {
    GBTConfig config;
    double base_score = 0.0;
    std::vector<std::string> feature_names;
    std::vector<RegressionTree> trees;

    std::size_t n_features() const noexcept { return feature_names.size(); }
    /// base_score, then + eta * tree output for each tree in order.
    double predict(std::span<const double> x) const;
    std::vector<double> predict_batch(const num::Tensor& x) const;

    nlohmann::json to_json() const;
    static BoostedTreeModel from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static BoostedTreeModel load(const std::filesystem::path& path);

    friend bool operator==(const BoostedTreeModel&, const BoostedTreeModel&) = default;
};

/// (1/N) sum (pred - y)^2 + (2/N) reg_l1 sum over all leaves of |eta w|:
/// twice the per-sample mean of the boosting objective, L1 term charged on
/// the shrunk leaf outputs that actually enter the prediction.
double training_objective(std::span<const double> pred, std::span<const double> target,
                          const BoostedTreeModel& model);

struct FitResult {
    BoostedTreeModel model;
    std::vector<double> objective;  // entry 0: base score only; entry r: after r trees
};

using RoundCallback = std::function<void(std::size_t round, double objective)>;

/// Names default to f0..f{D-1}. N < 2, non-finite input: DataError.
FitResult fit_gbt(const num::Tensor& x, std::span<const double> y, const GBTConfig& cfg,
                  std::vector<std::string> feature_names = {}, const RoundCallback& on_round = {});

/// Split counts per feature (F-score) and the summed split gain.
struct FeatureImportance {
    std::vector<std::string> names;
    std::vector<std::size_t> fscore;
    std::vector<double> total_gain;

    /// Feature indices by descending F-score, ties by index.
    std::vector<std::size_t> ranking() const;
};

FeatureImportance feature_importance(const BoostedTreeModel& model);

}  // namespace bttf::gbt
