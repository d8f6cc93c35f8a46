// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bttf/tensor.hpp"

namespace bttf::data {

inline constexpr std::string_view kDateColumn = "Formatted Date";

/// The eight numeric variables of the weather schema, in storage order.
inline const std::array<std::string, 8> kWeatherColumns = {
    "Temperature (C)",       "Apparent Temperature (C)", "Humidity",   "Wind Speed (km/h)",
    "Wind Bearing (degrees)", "Visibility (km)",         "Loud Cover", "Pressure (millibars)",
};

/// Parsed CSV before cleaning. Unparseable or empty numeric cells are NaN,
/// unparseable timestamps are nullopt; clean() drops those rows.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::optional<std::int64_t>> timestamps;  // seconds since epoch, UTC
    num::Tensor values;                                   // rows x columns

    std::size_t rows() const noexcept { return timestamps.size(); }
};

/// Clean observations: finite values, strictly increasing timestamps.
struct TimeSeriesTable {
    std::vector<std::string> columns;
    std::vector<std::int64_t> timestamps;
    num::Tensor values;  // rows x columns

    std::size_t rows() const noexcept { return timestamps.size(); }
    std::size_t cols() const noexcept { return columns.size(); }
    std::size_t column_index(std::string_view name) const;  // DataError if absent
};

/// "YYYY-MM-DD[ T]HH:MM[:SS[.fff]][ ][Z|+HHMM|+HH:MM]" to UTC epoch seconds.
std::optional<std::int64_t> parse_timestamp(std::string_view text);
/// Inverse of parse_timestamp in the dataset's own style, always "+0000".
std::string format_timestamp(std::int64_t seconds);

/// Reads the weather CSV, keeping the timestamp and the eight numeric
/// variables in file order. A missing required column throws SchemaError.
RawTable ingest_csv(const std::filesystem::path& path);

struct CleanStats {
    std::size_t input_rows = 0;
    std::size_t dropped_invalid = 0;
    std::size_t dropped_duplicate = 0;
};

/// Drops rows with a missing/non-numeric value or bad timestamp, sorts by
/// time and keeps the first row of each timestamp. Empty result: DataError.
TimeSeriesTable clean(const RawTable& raw, CleanStats* stats = nullptr);
TimeSeriesTable clean(const TimeSeriesTable& table, CleanStats* stats = nullptr);

/// Per-UTC-day means. Days with fewer than `min_rows` rows are dropped.
TimeSeriesTable aggregate_daily(const TimeSeriesTable& table, std::size_t min_rows = 20);

/// Removes columns whose values are all identical, never `keep`.
TimeSeriesTable drop_constant_columns(const TimeSeriesTable& table, std::size_t keep);

/// Writes the Kaggle-style CSV (date column plus the table's columns).
/// Numbers use 17 significant digits so values round-trip exactly.
void write_csv(const TimeSeriesTable& table, const std::filesystem::path& path);

void save_table(const TimeSeriesTable& table, const std::filesystem::path& path);
TimeSeriesTable load_table(const std::filesystem::path& path);

/// One supervised example anchored at time index t.
struct WindowSample {
    num::Tensor window;           // k x d_in, rows t-k .. t-1
    std::vector<double> present;  // non-target features of row t-1
    std::vector<double> target;   // target column, rows t .. t+h-1
    std::size_t t_index = 0;
};

/// Every valid origin t in [k, T-h]; count T - k - h + 1. Throws DataError
/// if k or h is zero or the table is too short.
std::vector<WindowSample> make_windows(const TimeSeriesTable& table, std::size_t k, std::size_t h,
                                       std::size_t target_index);

/// Per-feature z-score parameters (population std). Constant features get
/// mean 0 and std 1 so they pass through unchanged, and are flagged.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<bool> constant;
    std::size_t target_index = 0;
    std::vector<std::string> warnings;

    std::size_t features() const noexcept { return mean.size(); }
    double normalize(double x, std::size_t feature) const { return (x - mean[feature]) / stddev[feature]; }
    double denormalize(double z, std::size_t feature) const { return z * stddev[feature] + mean[feature]; }
    double normalize_target(double x) const { return normalize(x, target_index); }
    double denormalize_target(double z) const { return denormalize(z, target_index); }
    num::Tensor normalize_window(const num::Tensor& window) const;

    friend bool operator==(const NormStats& a, const NormStats& b) {
        return a.mean == b.mean && a.stddev == b.stddev && a.constant == b.constant && a.target_index == b.target_index;
    }
};

nlohmann::json to_json(const NormStats& stats);
NormStats norm_stats_from_json(const nlohmann::json& j);

/// Statistics over the rows of a matrix (rows are observations).
NormStats fit_stats(const num::Tensor& rows, std::size_t target_index);
/// Statistics over the distinct table rows covered by the samples' windows.
NormStats normalize_fit(std::span<const WindowSample> train, std::size_t target_index);
/// z-scored copies: windows per feature, present by the non-target
/// features' stats, targets by the target feature's stats.
std::vector<WindowSample> normalize_apply(const NormStats& stats, std::span<const WindowSample> samples);

struct SplitSpec {
    double train = 0.7;
    double val = 0.15;
    double test = 0.15;
};

std::vector<std::string> validate(const SplitSpec& spec);

struct SplitBounds {
    std::size_t train_end = 0;  // [0, train_end)
    std::size_t val_end = 0;    // [train_end, val_end); test is [val_end, n)
    std::size_t total = 0;
};

/// Chronological boundaries at floor(N * fraction). Empty splits: ConfigError.
SplitBounds split_bounds(std::size_t n, const SplitSpec& spec);

struct Splits {
    std::vector<WindowSample> train;
    std::vector<WindowSample> val;
    std::vector<WindowSample> test;
    SplitBounds bounds;
};

Splits chrono_split(std::span<const WindowSample> samples, const SplitSpec& spec);

/// Table preparation knobs shared by training, benchmarking and prediction.
struct DataOptions {
    enum class Granularity { daily, hourly };
    Granularity granularity = Granularity::daily;
    std::size_t k = 7;
    std::size_t h = 1;
    std::string target = "Temperature (C)";
    bool drop_constant = false;
    std::size_t min_rows_per_day = 20;
};

std::vector<std::string> validate(const DataOptions& opts);
nlohmann::json to_json(const DataOptions& opts);
DataOptions data_options_from_json(const nlohmann::json& j);

/// Aggregation and column selection applied to a cleaned table.
TimeSeriesTable prepare_table(const TimeSeriesTable& cleaned, const DataOptions& opts);

struct PreparedData {
    TimeSeriesTable table;
    std::size_t target_index = 0;
    std::vector<std::string> present_names;
    Splits splits;
    NormStats stats;  // fit on splits.train only
};

PreparedData prepare(const TimeSeriesTable& cleaned, const DataOptions& opts, const SplitSpec& split);

/// Daily weather surrogate with the dataset's schema: a seasonal cycle, an
/// autoregressive anomaly, a thresholded humidity-wind interaction and
/// noise. Hourly rows (24 per day) so the daily aggregation path is exercised.
TimeSeriesTable synthetic_weather(std::size_t days, std::uint64_t seed);

}  // namespace bttf::data
