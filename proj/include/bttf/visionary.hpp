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

#include "bttf/autodiff.hpp"
#include "bttf/dataio.hpp"
#include "bttf/optim.hpp"

namespace bttf {

/// Anything that maps an input window (k x d_in, original units) to a
/// forecast vector. The decision stage only sees this interface.
class Forecaster {
public:
    virtual ~Forecaster() = default;
    virtual std::size_t horizon() const = 0;
    virtual std::vector<double> forecast(const num::Tensor& window) const = 0;
    /// One forecast per window; must agree with forecast() bitwise.
    virtual std::vector<std::vector<double>> forecast_batch(std::span<const num::Tensor> windows) const;
};

}  // namespace bttf

namespace bttf::visionary {

enum class Loss { mse, mae };

struct VisionaryConfig {
    std::size_t k = 7;
    std::size_t h = 1;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t n_layers = 2;
    std::size_t d_ff = 128;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    std::uint64_t seed = 42;
    std::size_t target_index = 0;
    Loss loss = Loss::mse;
    double dropout = 0.0;  // recorded only; dropout is not applied

    friend bool operator==(const VisionaryConfig&, const VisionaryConfig&) = default;
};

std::vector<std::string> validate(const VisionaryConfig& cfg);
nlohmann::json to_json(const VisionaryConfig& cfg);
/// Missing keys keep their defaults.
VisionaryConfig visionary_config_from_json(const nlohmann::json& j, VisionaryConfig base = {});

/// Sinusoidal encoding, k x d_model: column 2i is sin(pos / 10000^(2i/d)),
/// column 2i+1 the matching cosine. Odd or < 2 d_model: ConfigError.
num::Tensor positional_encoding(std::size_t k, std::size_t d_model);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
};

using LearningCurve = std::vector<EpochRecord>;

/// Encoder-only attention forecaster. Pipeline per window: input projection,
/// positional encoding, n_layers x (attention, residual, layer norm,
/// feed-forward, residual, layer norm), last-position readout, linear head.
class VisionaryModel final : public Forecaster {
public:
    /// Fresh Xavier-initialised parameters drawn from cfg.seed.
    VisionaryModel(VisionaryConfig cfg, std::size_t d_in, data::NormStats stats);

    const VisionaryConfig& config() const noexcept { return cfg_; }
    std::size_t d_in() const noexcept { return d_in_; }
    const data::NormStats& norm_stats() const noexcept { return stats_; }

    std::span<num::Parameter> parameters() noexcept { return params_; }
    std::span<const num::Parameter> parameters() const noexcept { return params_; }
    std::vector<num::Parameter*> parameter_ptrs();
    num::Parameter& parameter(const std::string& name);
    const num::Parameter& parameter(const std::string& name) const;

    /// Graph for `batch` stacked normalized windows, x = [batch*k x d_in].
    /// With trainable=true parameters enter as Graph::param nodes, otherwise
    /// as constants. Attention node ids are appended to `attention_nodes`.
    num::Var forward(num::Graph& g, num::Var x, std::size_t batch, bool trainable,
                     std::vector<std::size_t>* attention_nodes = nullptr);
    num::Var forward(num::Graph& g, num::Var x, std::size_t batch,
                     std::vector<std::size_t>* attention_nodes = nullptr) const;

    /// Configured loss of the model on normalized x = [batch*k x d_in], y = [batch x h].
    num::Var loss(num::Graph& g, const num::Tensor& x, const num::Tensor& y, std::size_t batch);

    /// Normalized forecast for one normalized window.
    std::vector<double> encoder_forward(const num::Tensor& normalized_window) const;
    /// Attention weights of every layer for one normalized window.
    std::vector<num::Tensor> attention_weights(const num::Tensor& normalized_window) const;

    /// Forecast in original units for a window in original units.
    std::vector<double> predict_horizon(const num::Tensor& window) const;

    std::size_t horizon() const override { return cfg_.h; }
    std::vector<double> forecast(const num::Tensor& window) const override { return predict_horizon(window); }
    std::vector<std::vector<double>> forecast_batch(std::span<const num::Tensor> windows) const override;

    void save(const std::filesystem::path& path) const;
    static VisionaryModel load(const std::filesystem::path& path);

private:
    template <class Self, class Bind>
    static num::Var forward_impl(Self& self, num::Graph& g, num::Var x, std::size_t batch, Bind bind,
                                 std::vector<std::size_t>* attention_nodes);
    void add_param(const std::string& name, std::size_t rows, std::size_t cols, int init);

    VisionaryConfig cfg_;
    std::size_t d_in_ = 0;
    data::NormStats stats_;
    std::vector<num::Parameter> params_;
    std::vector<std::pair<std::string, std::size_t>> index_;
    num::Tensor pe_;
};

/// Called after every epoch with the model as of that epoch.
using EpochCallback = std::function<void(const VisionaryModel&, const EpochRecord&)>;

struct TrainResult {
    VisionaryModel model;
    LearningCurve curve;
};

/// Mini-batch Adam on the configured loss of normalized targets. `stats`
/// normalizes every sample; the validation split only feeds the curve.
/// Empty train set: DataError. Non-finite loss: NumericError naming the epoch.
TrainResult train_visionary(std::span<const data::WindowSample> train, std::span<const data::WindowSample> val,
                            const VisionaryConfig& cfg, const data::NormStats& stats,
                            const EpochCallback& on_epoch = {});

/// Stacks normalized windows into [n*k x d_in] and targets into [n x h].
void stack_batch(std::span<const data::WindowSample> samples, std::span<const std::size_t> order,
                 num::Tensor& x, num::Tensor& y);

}  // namespace bttf::visionary
