// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include "bttf/pipeline.hpp"

#include <cmath>
#include <fstream>

#include "bttf/error.hpp"

namespace bttf::pipeline {

using num::Tensor;

std::string to_string(AdaptationMode mode) { return mode == AdaptationMode::residual ? "residual" : "direct"; }

AdaptationMode adaptation_mode_from_string(const std::string& s) {
    if (s == "residual") return AdaptationMode::residual;
    if (s == "direct") return AdaptationMode::direct;
    throw ConfigError("bttf.adaptation_mode: expected \"residual\" or \"direct\", got \"" + s + "\"");
}

std::vector<std::string> validate(const BTTFConfig& cfg) {
    auto issues = visionary::validate(cfg.visionary);
    for (auto& i : gbt::validate(cfg.gbt)) issues.push_back(std::move(i));
    return issues;
}

std::vector<std::string> FeatureLayout::names() const {
    std::vector<std::string> out = present_names;
    for (std::size_t j = 0; j < horizon; ++j) out.push_back(j == 0 ? "forecast[t]" : "forecast[t+" + std::to_string(j) + "]");
    return out;
}

nlohmann::json FeatureLayout::to_json() const {
    return {{"present_names", present_names}, {"horizon", horizon},         {"k", k},
            {"d_in", d_in},                   {"target_index", target_index}, {"target_name", target_name},
            {"features", names()}};
}

FeatureLayout FeatureLayout::from_json(const nlohmann::json& j) {
    FeatureLayout l;
    try {
        l.present_names = j.at("present_names").get<std::vector<std::string>>();
        l.horizon = j.at("horizon").get<std::size_t>();
        l.k = j.at("k").get<std::size_t>();
        l.d_in = j.at("d_in").get<std::size_t>();
        l.target_index = j.at("target_index").get<std::size_t>();
        l.target_name = j.at("target_name").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed feature layout: ") + e.what());
    }
    return l;
}

std::vector<double> assemble_decision_features(std::span<const double> present, std::span<const double> forecast,
                                               const FeatureLayout& layout) {
    if (present.size() != layout.present_names.size() || forecast.size() != layout.horizon || forecast.empty()) {
        throw ShapeError("decision features: got " + std::to_string(present.size()) + " present + " +
                         std::to_string(forecast.size()) + " forecast values, layout expects " +
                         std::to_string(layout.present_names.size()) + " + " + std::to_string(layout.horizon));
    }
    std::vector<double> out(present.begin(), present.end());
    out.insert(out.end(), forecast.begin(), forecast.end());
    return out;
}

AdjustedState adapt_present(double x_t, double delta) {
    if (!std::isfinite(x_t) || !std::isfinite(delta)) {
        throw NumericError("adapt_present: non-finite input (x_t=" + std::to_string(x_t) +
                           ", delta=" + std::to_string(delta) + ")");
    }
    AdjustedState s;
    s.x_t = x_t;
    s.delta = delta;
    s.x_adjusted = x_t + delta;
    return s;
}

double anchor_of(const Tensor& window, std::size_t target_index) {
    if (window.rows() == 0 || target_index >= window.cols()) throw ShapeError("anchor: empty window or bad target");
    return window(window.rows() - 1, target_index);
}

std::vector<double> PassThroughForecaster::forecast(const Tensor& window) const {
    if (window.rows() != k_ || target_index_ >= window.cols()) {
        throw ShapeError("pass-through forecaster: window " + num::shape_string(window.shape()) + " for k=" +
                         std::to_string(k_));
    }
    std::vector<double> out(k_);
    for (std::size_t i = 0; i < k_; ++i) out[i] = window(i, target_index_);
    return out;
}

namespace {

void check_layout(const FeatureLayout& layout, const Forecaster& f) {
    if (f.horizon() != layout.horizon) {
        throw ShapeError("forecaster horizon " + std::to_string(f.horizon()) + " != layout horizon " +
                         std::to_string(layout.horizon));
    }
}

std::vector<Tensor> windows_of(std::span<const data::WindowSample> samples) {
    std::vector<Tensor> w;
    w.reserve(samples.size());
    for (const auto& s : samples) w.push_back(s.window);
    return w;
}

AdjustedState finish(AdaptationMode mode, double anchor, double output) {
    if (mode == AdaptationMode::residual) return adapt_present(anchor, output);
    // Direct mode: the decision output is the estimate. Nudge delta so that
    // x_t + delta reproduces it; when no double does (anchor and output far
    // apart in magnitude), the estimate wins and the sum is off by an ulp.
    double delta = output - anchor;
    for (int i = 0; i < 4 && anchor + delta != output; ++i) {
        delta = std::nextafter(delta, anchor + delta < output ? HUGE_VAL : -HUGE_VAL);
    }
    if (anchor + delta != output) delta = output - anchor;
    AdjustedState s = adapt_present(anchor, delta);
    s.x_adjusted = output;
    return s;
}

}  // namespace

DecisionData decision_data(const Forecaster& forecaster, std::span<const data::WindowSample> samples,
                           const FeatureLayout& layout, AdaptationMode mode) {
    check_layout(layout, forecaster);
    DecisionData d;
    d.features = Tensor(samples.size(), layout.width());
    const auto forecasts = forecaster.forecast_batch(windows_of(samples));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const auto row = assemble_decision_features(s.present, forecasts[i], layout);
        std::copy(row.begin(), row.end(), d.features.row(i).begin());
        const double anchor = anchor_of(s.window, layout.target_index);
        d.anchors.push_back(anchor);
        if (s.target.empty()) throw ShapeError("decision data: sample without target");
        d.targets.push_back(mode == AdaptationMode::residual ? s.target[0] - anchor : s.target[0]);
    }
    return d;
}

BTTFModel fit_decision_stage(std::shared_ptr<const Forecaster> forecaster, std::span<const data::WindowSample> samples,
                             const BTTFConfig& cfg, FeatureLayout layout, data::NormStats stats) {
    if (!forecaster) throw ConfigError("fit_decision_stage: no forecaster");
    if (samples.empty()) throw DataError("stage 2: empty decision training set");
    const DecisionData d = decision_data(*forecaster, samples, layout, cfg.adaptation_mode);
    BTTFModel m;
    m.decision = gbt::fit_gbt(d.features, d.targets, cfg.gbt, layout.names()).model;
    m.visionary = std::move(forecaster);
    m.norm_stats = std::move(stats);
    m.layout = std::move(layout);
    m.mode = cfg.adaptation_mode;
    return m;
}

BTTFTrainResult train_bttf(std::span<const data::WindowSample> train, std::span<const data::WindowSample> val,
                           const BTTFConfig& cfg, const data::NormStats& stats, FeatureLayout layout,
                           const visionary::EpochCallback& on_epoch) {
    if (auto issues = validate(cfg); !issues.empty()) {
        std::string msg = "invalid bttf config:";
        for (const auto& i : issues) msg += "\n  " + i;
        throw ConfigError(msg);
    }
    if (cfg.visionary.h != layout.horizon) throw ConfigError("visionary.h must equal the layout horizon");
    auto stage1 = visionary::train_visionary(train, val, cfg.visionary, stats, on_epoch);
    auto forecaster = std::make_shared<const visionary::VisionaryModel>(std::move(stage1.model));
    BTTFTrainResult r{fit_decision_stage(forecaster, train, cfg, std::move(layout), stats), std::move(stage1.curve), {}};
    return r;
}

FeatureLayout make_layout(const data::PreparedData& prepared, std::size_t horizon) {
    FeatureLayout l;
    l.present_names = prepared.present_names;
    l.horizon = horizon;
    l.k = prepared.splits.train.empty() ? 0 : prepared.splits.train.front().window.rows();
    l.d_in = prepared.table.cols();
    l.target_index = prepared.target_index;
    l.target_name = prepared.table.columns[prepared.target_index];
    return l;
}

AdjustedState predict_bttf(const BTTFModel& model, const Tensor& window, std::span<const double> present) {
    if (!model.visionary) throw ConfigError("predict_bttf: model has no forecaster");
    if (window.rows() != model.layout.k || window.cols() != model.layout.d_in) {
        throw ShapeError("predict_bttf: window " + num::shape_string(window.shape()) + ", layout expects [" +
                         std::to_string(model.layout.k) + "x" + std::to_string(model.layout.d_in) + "]");
    }
    const auto forecast = model.visionary->forecast(window);
    const auto features = assemble_decision_features(present, forecast, model.layout);
    return finish(model.mode, anchor_of(window, model.layout.target_index), model.decision.predict(features));
}

std::vector<AdjustedState> predict_bttf_batch(const BTTFModel& model, std::span<const data::WindowSample> samples) {
    if (!model.visionary) throw ConfigError("predict_bttf: model has no forecaster");
    for (const auto& s : samples) {
        if (s.window.rows() != model.layout.k || s.window.cols() != model.layout.d_in) {
            throw ShapeError("predict_bttf: window " + num::shape_string(s.window.shape()) + " does not match layout");
        }
    }
    const DecisionData d = decision_data(*model.visionary, samples, model.layout, model.mode);
    const auto outputs = model.decision.predict_batch(d.features);
    std::vector<AdjustedState> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        AdjustedState s = finish(model.mode, d.anchors[i], outputs[i]);
        s.t_index = samples[i].t_index;
        s.truth = samples[i].target.empty() ? s.truth : samples[i].target[0];
        out.push_back(s);
    }
    return out;
}

namespace {

// Window/present for origin t; target row t when it exists.
data::WindowSample stream_sample(const data::TimeSeriesTable& table, std::size_t t, const FeatureLayout& layout) {
    data::WindowSample s;
    s.t_index = t;
    s.window = Tensor(layout.k, table.cols());
    for (std::size_t i = 0; i < layout.k; ++i) {
        const auto src = table.values.row(t - layout.k + i);
        std::copy(src.begin(), src.end(), s.window.row(i).begin());
    }
    for (std::size_t c = 0; c < table.cols(); ++c) {
        if (c != layout.target_index) s.present.push_back(table.values(t - 1, c));
    }
    if (t < table.rows()) s.target.push_back(table.values(t, layout.target_index));
    return s;
}

}  // namespace

std::vector<AdjustedState> feedback_loop(BTTFModel& model, const data::TimeSeriesTable& stream,
                                         std::size_t refit_interval, const LoopRange& range) {
    const std::size_t k = model.layout.k;
    const std::size_t T = stream.rows();
    if (T < k + 1) {
        throw DataError("feedback loop: stream has " + std::to_string(T) + " rows, need at least k+1 = " +
                        std::to_string(k + 1));
    }
    if (stream.cols() != model.layout.d_in) {
        throw ShapeError("feedback loop: stream has " + std::to_string(stream.cols()) + " columns, model expects " +
                         std::to_string(model.layout.d_in));
    }
    const std::size_t first = std::max(range.from, k);
    const std::size_t last_possible = range.include_next ? T : T - 1;
    if (first > last_possible) throw DataError("feedback loop: start index beyond the stream");
    std::size_t last = last_possible;
    if (range.steps) {
        if (*range.steps == 0) return {};
        last = std::min(last_possible, first + *range.steps - 1);
    }

    BTTFConfig refit_cfg;
    refit_cfg.gbt = model.decision.config;
    refit_cfg.adaptation_mode = model.mode;

    std::vector<AdjustedState> out;
    std::vector<data::WindowSample> seen;
    for (std::size_t t = first; t <= last; ++t) {
        data::WindowSample s = stream_sample(stream, t, model.layout);
        AdjustedState state = predict_bttf(model, s.window, s.present);
        state.t_index = t;
        if (!s.target.empty()) {
            state.truth = s.target[0];
            seen.push_back(std::move(s));
        }
        out.push_back(state);
        if (refit_interval > 0 && out.size() % refit_interval == 0 && t < last && seen.size() >= 2) {
            BTTFModel refit = fit_decision_stage(model.visionary, seen, refit_cfg, model.layout, model.norm_stats);
            model.decision = std::move(refit.decision);
        }
    }
    return out;
}

void BTTFModel::save(const std::filesystem::path& path) const {
    const auto* vis = dynamic_cast<const visionary::VisionaryModel*>(visionary.get());
    if (!vis) throw ConfigError("bundle save: the forecaster is not a trained visionary model");
    std::string stem = path.stem().string();
    if (stem.size() > 7 && stem.ends_with(".bundle")) stem.resize(stem.size() - 7);
    const std::string vis_file = stem + ".visionary.bin";
    const std::string dec_file = stem + ".decision.json";
    const auto dir = path.parent_path();
    vis->save(dir / vis_file);
    decision.save(dir / dec_file);
    const nlohmann::json manifest = {{"format", "bttf-bundle-v1"},
                                     {"visionary", vis_file},
                                     {"decision", dec_file},
                                     {"adaptation_mode", to_string(mode)},
                                     {"layout", layout.to_json()},
                                     {"norm_stats", data::to_json(norm_stats)},
                                     {"metadata", metadata}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << manifest.dump(2) << '\n';
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

BTTFModel BTTFModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open bundle '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (j.value("format", std::string()) != "bttf-bundle-v1") {
        throw DataError("'" + path.string() + "' is not a bttf-bundle-v1 bundle");
    }
    BTTFModel m;
    const auto dir = path.parent_path();
    try {
        auto vis = visionary::VisionaryModel::load(dir / j.at("visionary").get<std::string>());
        m.decision = gbt::BoostedTreeModel::load(dir / j.at("decision").get<std::string>());
        m.mode = adaptation_mode_from_string(j.at("adaptation_mode").get<std::string>());
        m.layout = FeatureLayout::from_json(j.at("layout"));
        m.norm_stats = data::norm_stats_from_json(j.at("norm_stats"));
        m.metadata = j.value("metadata", nlohmann::json::object());
        m.visionary = std::make_shared<const visionary::VisionaryModel>(std::move(vis));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed bundle '" + path.string() + "': " + e.what());
    }
    if (m.decision.n_features() != m.layout.width()) throw DataError("bundle: decision width does not match layout");
    return m;
}

}  // namespace bttf::pipeline
