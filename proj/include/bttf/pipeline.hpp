// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bttf/dataio.hpp"
#include "bttf/gbt.hpp"
#include "bttf/visionary.hpp"

namespace bttf::pipeline {

enum class AdaptationMode { residual, direct };

std::string to_string(AdaptationMode mode);
AdaptationMode adaptation_mode_from_string(const std::string& s);  // ConfigError on unknown

struct BTTFConfig {
    visionary::VisionaryConfig visionary;
    gbt::GBTConfig gbt;
    AdaptationMode adaptation_mode = AdaptationMode::residual;
    std::size_t refit_interval = 0;  // 0: never refit in the feedback loop
};

std::vector<std::string> validate(const BTTFConfig& cfg);

/// Order and meaning of the decision-maker inputs: the present features
/// (non-target columns of row t-1), then the forecast for t .. t+h-1.
struct FeatureLayout {
    std::vector<std::string> present_names;
    std::size_t horizon = 1;
    std::size_t k = 7;
    std::size_t d_in = 0;
    std::size_t target_index = 0;
    std::string target_name;

    std::size_t width() const noexcept { return present_names.size() + horizon; }
    std::vector<std::string> names() const;
    nlohmann::json to_json() const;
    static FeatureLayout from_json(const nlohmann::json& j);
    friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

struct AdjustedState {
    double x_t = 0.0;         // anchor: last observed target value
    double delta = 0.0;
    double x_adjusted = 0.0;  // x_t + delta; direct mode: the decision output (may differ by an ulp)
    std::size_t t_index = 0;
    double truth = std::numeric_limits<double>::quiet_NaN();  // NaN when not yet observed
};

/// [present..., forecast...]. Size mismatch with the layout: ShapeError.
std::vector<double> assemble_decision_features(std::span<const double> present, std::span<const double> forecast,
                                               const FeatureLayout& layout);

/// {x_t, delta, x_t + delta}. Non-finite input: NumericError.
AdjustedState adapt_present(double x_t, double delta);

/// Last observed value of the target column in a window.
double anchor_of(const num::Tensor& window, std::size_t target_index);

/// Echoes the window's target column as a k-step "forecast". With it the
/// decision stage sees [present, last k target values].
class PassThroughForecaster final : public Forecaster {
public:
    PassThroughForecaster(std::size_t k, std::size_t target_index) : k_(k), target_index_(target_index) {}
    std::size_t horizon() const override { return k_; }
    std::vector<double> forecast(const num::Tensor& window) const override;

private:
    std::size_t k_;
    std::size_t target_index_;
};

struct BTTFModel {
    std::shared_ptr<const Forecaster> visionary;
    gbt::BoostedTreeModel decision;
    data::NormStats norm_stats;
    FeatureLayout layout;
    AdaptationMode mode = AdaptationMode::residual;
    nlohmann::json metadata = nlohmann::json::object();  // stored verbatim in the bundle

    /// Writes the bundle manifest at `path` plus "<stem>.visionary.bin" and
    /// "<stem>.decision.json" next to it ("m.bundle.json" has stem "m"). Needs a VisionaryModel forecaster.
    void save(const std::filesystem::path& path) const;
    static BTTFModel load(const std::filesystem::path& path);
};

/// Stage 2 only: forecasts every sample, assembles decision features and
/// fits the decision maker on the residual or direct target.
BTTFModel fit_decision_stage(std::shared_ptr<const Forecaster> forecaster, std::span<const data::WindowSample> samples,
                             const BTTFConfig& cfg, FeatureLayout layout, data::NormStats stats);

struct BTTFTrainResult {
    BTTFModel model;
    visionary::LearningCurve curve;
    std::vector<double> gbt_objective;
};

/// Stage 1 (visionary on windows) then stage 2.
BTTFTrainResult train_bttf(std::span<const data::WindowSample> train, std::span<const data::WindowSample> val,
                           const BTTFConfig& cfg, const data::NormStats& stats, FeatureLayout layout,
                           const visionary::EpochCallback& on_epoch = {});

/// Layout for a prepared dataset and horizon.
FeatureLayout make_layout(const data::PreparedData& prepared, std::size_t horizon);

/// Decision-stage inputs and targets for a sample set.
struct DecisionData {
    num::Tensor features;
    std::vector<double> targets;
    std::vector<double> anchors;
};
DecisionData decision_data(const Forecaster& forecaster, std::span<const data::WindowSample> samples,
                           const FeatureLayout& layout, AdaptationMode mode);

AdjustedState predict_bttf(const BTTFModel& model, const num::Tensor& window, std::span<const double> present);
/// One state per sample, bitwise equal to predict_bttf on each; truth is target[0].
std::vector<AdjustedState> predict_bttf_batch(const BTTFModel& model, std::span<const data::WindowSample> samples);

struct LoopRange {
    std::size_t from = 0;                 // first origin; clamped up to k
    std::optional<std::size_t> steps;     // default: through the last row (t = T - 1)
    bool include_next = false;            // also emit t = T, whose truth is unknown
};

/// Slides over the table one row at a time. Every `refit_interval` emitted
/// states the decision maker is refit on all stream samples with known
/// truth so far. `model` holds the latest decision maker afterwards.
std::vector<AdjustedState> feedback_loop(BTTFModel& model, const data::TimeSeriesTable& stream,
                                         std::size_t refit_interval, const LoopRange& range = {});

}  // namespace bttf::pipeline
