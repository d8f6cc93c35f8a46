// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include "bttf/visionary.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "bttf/container.hpp"
#include "bttf/error.hpp"
#include "bttf/ops.hpp"
#include "bttf/rng.hpp"

namespace bttf {

std::vector<std::vector<double>> Forecaster::forecast_batch(std::span<const num::Tensor> windows) const {
    std::vector<std::vector<double>> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(forecast(w));
    return out;
}

}  // namespace bttf

namespace bttf::visionary {

using num::Graph;
using num::Parameter;
using num::Tensor;
using num::Var;

namespace {

enum Init { kXavier, kZeros, kOnes };

constexpr std::size_t kInferenceBatch = 256;

const char* loss_name(Loss l) { return l == Loss::mse ? "mse" : "mae"; }

}  // namespace

std::vector<std::string> validate(const VisionaryConfig& cfg) {
    std::vector<std::string> issues;
    if (cfg.k < 1) issues.push_back("visionary.k: must be at least 1");
    if (cfg.h < 1) issues.push_back("visionary.h: must be at least 1");
    if (cfg.d_model < 2 || cfg.d_model % 2 != 0) issues.push_back("visionary.d_model: must be even and at least 2");
    if (cfg.n_heads < 1) {
        issues.push_back("visionary.n_heads: must be at least 1");
    } else if (cfg.d_model % cfg.n_heads != 0) {
        issues.push_back("visionary.n_heads: must divide d_model");
    }
    if (cfg.n_layers < 1) issues.push_back("visionary.n_layers: must be at least 1");
    if (cfg.d_ff < 1) issues.push_back("visionary.d_ff: must be at least 1");
    if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) issues.push_back("visionary.lr: must be positive");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) issues.push_back("visionary.beta1: must lie in [0, 1)");
    if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) issues.push_back("visionary.beta2: must lie in [0, 1)");
    if (!(cfg.adam_eps > 0.0)) issues.push_back("visionary.adam_eps: must be positive");
    if (cfg.batch_size < 1) issues.push_back("visionary.batch_size: must be at least 1");
    if (cfg.epochs < 1) issues.push_back("visionary.epochs: must be at least 1");
    if (cfg.dropout != 0.0) issues.push_back("visionary.dropout: only 0 is supported");
    return issues;
}

nlohmann::json to_json(const VisionaryConfig& cfg) {
    return {{"k", cfg.k},
            {"h", cfg.h},
            {"d_model", cfg.d_model},
            {"n_heads", cfg.n_heads},
            {"n_layers", cfg.n_layers},
            {"d_ff", cfg.d_ff},
            {"lr", cfg.lr},
            {"beta1", cfg.beta1},
            {"beta2", cfg.beta2},
            {"adam_eps", cfg.adam_eps},
            {"optimizer", "adam"},
            {"batch_size", cfg.batch_size},
            {"epochs", cfg.epochs},
            {"seed", cfg.seed},
            {"target_index", cfg.target_index},
            {"loss", loss_name(cfg.loss)},
            {"dropout", cfg.dropout}};
}

VisionaryConfig visionary_config_from_json(const nlohmann::json& j, VisionaryConfig c) {
    c.k = j.value("k", c.k);
    c.h = j.value("h", c.h);
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.target_index = j.value("target_index", c.target_index);
    c.dropout = j.value("dropout", c.dropout);
    const std::string loss = j.value("loss", std::string(loss_name(c.loss)));
    if (loss == "mse") {
        c.loss = Loss::mse;
    } else if (loss == "mae") {
        c.loss = Loss::mae;
    } else {
        throw ConfigError("visionary.loss: expected \"mse\" or \"mae\", got \"" + loss + "\"");
    }
    return c;
}

Tensor positional_encoding(std::size_t k, std::size_t d_model) {
    if (k < 1) throw ConfigError("positional_encoding: k must be at least 1");
    if (d_model < 2 || d_model % 2 != 0) throw ConfigError("positional_encoding: d_model must be even and >= 2");
    Tensor pe(k, d_model);
    for (std::size_t pos = 0; pos < k; ++pos) {
        for (std::size_t i = 0; i < d_model / 2; ++i) {
            const double angle = static_cast<double>(pos) /
                                 std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
            pe(pos, 2 * i) = std::sin(angle);
            pe(pos, 2 * i + 1) = std::cos(angle);
        }
    }
    return pe;
}

VisionaryModel::VisionaryModel(VisionaryConfig cfg, std::size_t d_in, data::NormStats stats)
    : cfg_(std::move(cfg)), d_in_(d_in), stats_(std::move(stats)) {
    if (auto issues = validate(cfg_); !issues.empty()) throw ConfigError(issues.front());
    if (d_in_ < 1) throw ConfigError("visionary: input width must be at least 1");
    if (stats_.features() != d_in_) {
        throw ShapeError("visionary: normalization stats cover " + std::to_string(stats_.features()) +
                         " features, model expects " + std::to_string(d_in_));
    }
    pe_ = positional_encoding(cfg_.k, cfg_.d_model);
    const std::size_t d = cfg_.d_model;
    add_param("input.weight", d_in_, d, kXavier);
    add_param("input.bias", 1, d, kZeros);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        for (const char* w : {"wq", "wk", "wv", "wo"}) {
            add_param(p + w + ".weight", d, d, kXavier);
            add_param(p + w + ".bias", 1, d, kZeros);
        }
        add_param(p + "ln1.gamma", 1, d, kOnes);
        add_param(p + "ln1.beta", 1, d, kZeros);
        add_param(p + "ff1.weight", d, cfg_.d_ff, kXavier);
        add_param(p + "ff1.bias", 1, cfg_.d_ff, kZeros);
        add_param(p + "ff2.weight", cfg_.d_ff, d, kXavier);
        add_param(p + "ff2.bias", 1, d, kZeros);
        add_param(p + "ln2.gamma", 1, d, kOnes);
        add_param(p + "ln2.beta", 1, d, kZeros);
    }
    add_param("head.weight", d, cfg_.h, kXavier);
    add_param("head.bias", 1, cfg_.h, kZeros);
}

void VisionaryModel::add_param(const std::string& name, std::size_t rows, std::size_t cols, int init) {
    Tensor value(rows, cols);
    if (init == kXavier) {
        // one stream per parameter so adding a parameter never reshuffles the others
        num::Rng rng = num::Rng(cfg_.seed).split(params_.size());
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (double& v : value.values()) v = rng.uniform(-bound, bound);
    } else if (init == kOnes) {
        value.fill(1.0);
    }
    index_.emplace_back(name, params_.size());
    params_.emplace_back(name, std::move(value));
}

std::vector<Parameter*> VisionaryModel::parameter_ptrs() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
}

Parameter& VisionaryModel::parameter(const std::string& name) {
    for (const auto& [n, i] : index_) {
        if (n == name) return params_[i];
    }
    throw ConfigError("visionary: no parameter named '" + name + "'");
}

const Parameter& VisionaryModel::parameter(const std::string& name) const {
    return const_cast<VisionaryModel*>(this)->parameter(name);
}

template <class Self, class Bind>
Var VisionaryModel::forward_impl(Self& self, Graph& g, Var x, std::size_t batch, Bind bind,
                                 std::vector<std::size_t>* attention_nodes) {
    const auto& cfg = self.cfg_;
    if (x.rows() != batch * cfg.k || x.cols() != self.d_in_) {
        throw ShapeError("visionary input " + num::shape_string(x.shape()) + ", expected [" +
                         std::to_string(batch * cfg.k) + "x" + std::to_string(self.d_in_) + "]");
    }
    auto P = [&](const std::string& name) { return bind(self.parameter(name)); };
    auto linear = [&](Var in, const std::string& name) {
        return num::add_row(num::matmul(in, P(name + ".weight")), P(name + ".bias"));
    };

    Var h = linear(x, "input");
    h = num::add_periodic_rows(h, g.constant(self.pe_));
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        Var att = num::attention(linear(h, p + "wq"), linear(h, p + "wk"), linear(h, p + "wv"), cfg.k, cfg.n_heads);
        if (attention_nodes) attention_nodes->push_back(att.id);
        h = num::layer_norm_rows(num::add(h, linear(att, p + "wo")), P(p + "ln1.gamma"), P(p + "ln1.beta"));
        Var ff = linear(num::relu(linear(h, p + "ff1")), p + "ff2");
        h = num::layer_norm_rows(num::add(h, ff), P(p + "ln2.gamma"), P(p + "ln2.beta"));
    }
    Var last = num::take_rows(h, cfg.k, cfg.k - 1);
    return linear(last, "head");
}

Var VisionaryModel::forward(Graph& g, Var x, std::size_t batch, bool trainable,
                            std::vector<std::size_t>* attention_nodes) {
    if (trainable) {
        return forward_impl(*this, g, x, batch, [&](Parameter& p) { return g.param(p); }, attention_nodes);
    }
    return std::as_const(*this).forward(g, x, batch, attention_nodes);
}

Var VisionaryModel::forward(Graph& g, Var x, std::size_t batch, std::vector<std::size_t>* attention_nodes) const {
    return forward_impl(*this, g, x, batch, [&](const Parameter& p) { return g.constant(p.value); },
                        attention_nodes);
}

Var VisionaryModel::loss(Graph& g, const Tensor& x, const Tensor& y, std::size_t batch) {
    Var pred = forward(g, g.constant(x), batch, true);
    Var target = g.constant(y);
    return cfg_.loss == Loss::mse ? num::mse_loss(pred, target) : num::mae_loss(pred, target);
}

std::vector<double> VisionaryModel::encoder_forward(const Tensor& normalized_window) const {
    if (normalized_window.rows() != cfg_.k || normalized_window.cols() != d_in_) {
        throw ShapeError("window " + num::shape_string(normalized_window.shape()) + " does not match model (" +
                         std::to_string(cfg_.k) + "x" + std::to_string(d_in_) + ")");
    }
    Graph g;
    Var out = forward(g, g.constant(normalized_window), 1);
    const auto v = out.value().values();
    return {v.begin(), v.end()};
}

std::vector<Tensor> VisionaryModel::attention_weights(const Tensor& normalized_window) const {
    Graph g;
    std::vector<std::size_t> ids;
    forward(g, g.constant(normalized_window), 1, &ids);
    std::vector<Tensor> out;
    for (std::size_t id : ids) out.push_back(g.aux(id));
    return out;
}

std::vector<double> VisionaryModel::predict_horizon(const Tensor& window) const {
    return forecast_batch(std::span<const Tensor>(&window, 1)).front();
}

std::vector<std::vector<double>> VisionaryModel::forecast_batch(std::span<const Tensor> windows) const {
    std::vector<std::vector<double>> out;
    out.reserve(windows.size());
    const std::size_t k = cfg_.k;
    for (std::size_t start = 0; start < windows.size(); start += kInferenceBatch) {
        const std::size_t n = std::min(kInferenceBatch, windows.size() - start);
        Tensor x(n * k, d_in_);
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor& w = windows[start + i];
            if (w.rows() != k || w.cols() != d_in_) {
                throw ShapeError("window " + num::shape_string(w.shape()) + " does not match model (" +
                                 std::to_string(k) + "x" + std::to_string(d_in_) + ")");
            }
            const Tensor z = stats_.normalize_window(w);
            std::copy(z.values().begin(), z.values().end(), x.values().begin() + static_cast<std::ptrdiff_t>(i * k * d_in_));
        }
        Graph g;
        const Tensor& y = forward(g, g.constant(std::move(x)), n).value();
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> f(cfg_.h);
            for (std::size_t j = 0; j < cfg_.h; ++j) f[j] = stats_.denormalize_target(y(i, j));
            out.push_back(std::move(f));
        }
    }
    return out;
}

void VisionaryModel::save(const std::filesystem::path& path) const {
    nlohmann::json header = {{"config", to_json(cfg_)}, {"d_in", d_in_}, {"norm_stats", data::to_json(stats_)}};
    std::vector<num::NamedTensor> tensors;
    for (const auto& p : params_) tensors.push_back({p.name, p.value});
    num::write_container(path, "bttf-visionary-v1", std::move(header), tensors);
}

VisionaryModel VisionaryModel::load(const std::filesystem::path& path) {
    const auto c = num::read_container(path, "bttf-visionary-v1");
    VisionaryModel m(visionary_config_from_json(c.header.at("config")), c.header.at("d_in").get<std::size_t>(),
                     data::norm_stats_from_json(c.header.at("norm_stats")));
    if (c.tensors.size() != m.params_.size()) throw DataError("'" + path.string() + "': parameter count mismatch");
    for (auto& p : m.params_) {
        const Tensor& t = c.at(p.name);
        if (t.shape() != p.value.shape()) throw DataError("'" + path.string() + "': bad shape for " + p.name);
        p.value = t;
        p.zero_grad();
    }
    return m;
}

void stack_batch(std::span<const data::WindowSample> samples, std::span<const std::size_t> order, Tensor& x,
                 Tensor& y) {
    const auto& first = samples[order.front()];
    const std::size_t k = first.window.rows(), d = first.window.cols(), h = first.target.size();
    x = Tensor(order.size() * k, d);
    y = Tensor(order.size(), h);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& s = samples[order[i]];
        if (s.window.rows() != k || s.window.cols() != d || s.target.size() != h) {
            throw ShapeError("samples disagree on (k, d_in, h)");
        }
        std::copy(s.window.values().begin(), s.window.values().end(),
                  x.values().begin() + static_cast<std::ptrdiff_t>(i * k * d));
        std::copy(s.target.begin(), s.target.end(), y.row(i).begin());
    }
}

namespace {

double evaluate_loss(VisionaryModel& model, std::span<const data::WindowSample> samples) {
    if (samples.empty()) return std::nan("");
    const std::size_t bs = std::max<std::size_t>(model.config().batch_size, kInferenceBatch);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t n = std::min(bs, order.size() - start);
        Tensor x, y;
        stack_batch(samples, std::span(order).subspan(start, n), x, y);
        Graph g;
        Var pred = std::as_const(model).forward(g, g.constant(x), n);
        Var target = g.constant(y);
        Var l = model.config().loss == Loss::mse ? num::mse_loss(pred, target) : num::mae_loss(pred, target);
        total += l.value()[0] * static_cast<double>(n);
    }
    return total / static_cast<double>(samples.size());
}

}  // namespace

TrainResult train_visionary(std::span<const data::WindowSample> train, std::span<const data::WindowSample> val,
                            const VisionaryConfig& cfg, const data::NormStats& stats, const EpochCallback& on_epoch) {
    if (auto issues = validate(cfg); !issues.empty()) {
        std::string msg = "invalid visionary config:";
        for (const auto& i : issues) msg += "\n  " + i;
        throw ConfigError(msg);
    }
    if (train.empty()) throw DataError("train_visionary: empty training set");
    const std::size_t d_in = train.front().window.cols();
    for (const auto* split : {&train, &val}) {
        for (const auto& s : *split) {
            if (s.window.rows() != cfg.k || s.window.cols() != d_in || s.target.size() != cfg.h) {
                throw ShapeError("train_visionary: sample at t=" + std::to_string(s.t_index) +
                                 " does not match (k, d_in, h)");
            }
        }
    }

    const auto ztrain = data::normalize_apply(stats, train);
    const auto zval = data::normalize_apply(stats, val);
    TrainResult result{VisionaryModel(cfg, d_in, stats), {}};
    VisionaryModel& model = result.model;
    const auto params = model.parameter_ptrs();
    num::AdamState adam;
    const num::AdamConfig adam_cfg{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps};
    num::Rng shuffle_rng = num::Rng(cfg.seed).split(0x5u);

    std::vector<std::size_t> order(ztrain.size());
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(std::span(order));
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - start);
            Tensor x, y;
            stack_batch(ztrain, std::span(order).subspan(start, n), x, y);
            Graph g;
            Var loss = model.loss(g, x, y, n);
            const double value = loss.value()[0];
            if (!std::isfinite(value)) {
                throw NumericError("training aborted: non-finite loss in epoch " + std::to_string(epoch) +
                                   ", batch starting at " + std::to_string(start));
            }
            for (auto* p : params) p->zero_grad();
            g.backward(loss);
            num::adam_step(params, adam, adam_cfg);
            total += value * static_cast<double>(n);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = total / static_cast<double>(ztrain.size());
        rec.val_loss = evaluate_loss(model, zval);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.curve.push_back(rec);
        if (on_epoch) on_epoch(model, rec);
    }
    for (auto* p : params) p->zero_grad();
    return result;
}

}  // namespace bttf::visionary
