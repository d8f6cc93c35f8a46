// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bttf/config.hpp"
#include "bttf/dataio.hpp"
#include "bttf/gbt.hpp"
#include "bttf/visionary.hpp"

namespace bttf::eval {

/// sqrt(mean((pred - truth)^2)). Empty or mismatched: ShapeError.
double rmse(std::span<const double> pred, std::span<const double> truth);
/// 1 - SS_res / SS_tot. N < 2: ShapeError; constant truth: NumericError.
double r2(std::span<const double> pred, std::span<const double> truth);
/// sum (truth - mean(truth))^2
double ss_tot(std::span<const double> truth);

enum class ModelKind { visionary, gbt_one_day, gbt_time_series, bttf };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);  // ConfigError on unknown
bool has_epochs(ModelKind kind);

struct MetricReport {
    std::string run_id;
    ModelKind kind = ModelKind::visionary;
    std::size_t epochs = 0;  // 0 for the tree baselines (single fit)
    double rmse = 0.0;
    double r2 = 0.0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_eval = 0;
    double ss_tot = 0.0;
    std::string split_label = "test";
    data::SplitBounds bounds;
    nlohmann::json config;

    nlohmann::json to_json() const;
    static MetricReport from_json(const nlohmann::json& j);
};

/// Reference values as reported in the original study.
struct PublishedReference {
    ModelKind kind;
    std::size_t epochs;
    double rmse;
    double r2;
    const char* time;
};
std::span<const PublishedReference> published_references();
std::optional<PublishedReference> published_reference(ModelKind kind, std::size_t epochs);

struct SuiteConfig {
    RunConfig run;
    std::vector<ModelKind> kinds = {ModelKind::visionary, ModelKind::gbt_one_day, ModelKind::gbt_time_series,
                                    ModelKind::bttf};
    std::vector<std::size_t> epochs = {5, 100, 200};
    std::vector<std::uint64_t> seeds = {42};
    bool resume = true;
    bool diagnostics = true;
};

/// RunConfig fields plus an optional "suite" object {kinds, epochs, seeds,
/// resume, diagnostics}. Every issue is reported together (ConfigError).
SuiteConfig parse_suite_config(const nlohmann::json& j);
nlohmann::json to_json(const SuiteConfig& suite);

/// Feature matrices of the tree baselines. One-day: the present features.
/// Time-series: the present features followed by the window's target column.
num::Tensor one_day_features(std::span<const data::WindowSample> samples);
num::Tensor time_series_features(std::span<const data::WindowSample> samples, std::size_t target_index);
std::vector<std::string> one_day_names(const data::PreparedData& prepared);
std::vector<std::string> time_series_names(const data::PreparedData& prepared, std::size_t k);
std::vector<double> first_targets(std::span<const data::WindowSample> samples);

/// Plain data behind the learning-curve, scatter, loss-histogram and
/// importance figures of one run.
struct Diagnostics {
    visionary::LearningCurve curve;
    std::vector<double> truth;
    std::vector<double> prediction;
    std::vector<double> train_sq_errors;
    std::vector<double> val_sq_errors;
    std::optional<gbt::FeatureImportance> importance;
};

/// Writes curves.csv, scatter.csv, loss_hist.csv and importance.csv (the
/// ones with data) into `dir`. Unwritable directory: DataError.
void export_diagnostics(const Diagnostics& d, const std::filesystem::path& dir, std::size_t hist_bins = 20);
void write_importance_csv(const gbt::FeatureImportance& fi, const std::filesystem::path& path);

struct BenchmarkOutput {
    std::vector<MetricReport> reports;
    std::string table;  // markdown
};

using Logger = std::function<void(const std::string&)>;

/// Runs every (seed, kind, epochs) cell on identical chronological splits.
/// Epoch-bearing cells of one seed share a single visionary training run
/// snapshotted at each requested epoch; wall time of a snapshot cell is the
/// training time up to that epoch plus its own stage-2 fit and prediction.
/// With out_dir set, reports.json is rewritten after every cell and cells
/// already present there are reused when suite.resume is true.
BenchmarkOutput run_benchmark(const data::TimeSeriesTable& cleaned, const SuiteConfig& suite,
                              const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                              const Logger& log = {});

/// Markdown comparison with the reference columns labeled "(paper)".
std::string render_table(std::span<const MetricReport> reports);
std::string format_duration(double seconds);

void write_reports(std::span<const MetricReport> reports, const std::filesystem::path& path);
std::vector<MetricReport> read_reports(const std::filesystem::path& path);

}  // namespace bttf::eval
