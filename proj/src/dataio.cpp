// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include "bttf/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "bttf/container.hpp"
#include "bttf/error.hpp"
#include "bttf/rng.hpp"

namespace bttf::data {

using num::Tensor;

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return NAN;
    double v = NAN;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return NAN;
    return v;
}

bool read_int(std::string_view& s, std::size_t digits, int& out) {
    if (s.size() < digits) return false;
    int v = 0;
    for (std::size_t i = 0; i < digits; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    s.remove_prefix(digits);
    return true;
}

bool eat(std::string_view& s, char c) {
    if (s.empty() || s.front() != c) return false;
    s.remove_prefix(1);
    return true;
}

}  // namespace

std::size_t TimeSeriesTable::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return i;
    }
    throw DataError("table has no column \"" + std::string(name) + "\"");
}

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
    std::string_view s = trim(text);
    int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
    if (!read_int(s, 4, y) || !eat(s, '-') || !read_int(s, 2, mo) || !eat(s, '-') || !read_int(s, 2, d)) {
        return std::nullopt;
    }
    if (!(eat(s, ' ') || eat(s, 'T'))) return std::nullopt;
    if (!read_int(s, 2, hh) || !eat(s, ':') || !read_int(s, 2, mm)) return std::nullopt;
    if (eat(s, ':') && !read_int(s, 2, ss)) return std::nullopt;
    if (eat(s, '.')) {
        while (!s.empty() && s.front() >= '0' && s.front() <= '9') s.remove_prefix(1);
    }
    eat(s, ' ');
    int offset = 0;
    if (!s.empty()) {
        if (s == "Z") {
            s.remove_prefix(1);
        } else {
            const char sign = s.front();
            if (sign != '+' && sign != '-') return std::nullopt;
            s.remove_prefix(1);
            int oh = 0, om = 0;
            if (!read_int(s, 2, oh)) return std::nullopt;
            eat(s, ':');
            if (!read_int(s, 2, om)) return std::nullopt;
            offset = (oh * 60 + om) * 60 * (sign == '-' ? -1 : 1);
        }
    }
    if (!s.empty() || hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    const std::int64_t days = std::chrono::sys_days{ymd}.time_since_epoch().count();
    return days * kSecondsPerDay + hh * 3600 + mm * 60 + ss - offset;
}

std::string format_timestamp(std::int64_t seconds) {
    std::int64_t days = seconds / kSecondsPerDay;
    std::int64_t rem = seconds % kSecondsPerDay;
    if (rem < 0) {
        rem += kSecondsPerDay;
        --days;
    }
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d.000 +0000", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                  static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
    return buf;
}

RawTable ingest_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const auto header = split_csv_line(line);
    std::vector<std::string> missing;
    auto find = [&](std::string_view name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) return i;
        }
        missing.emplace_back(name);
        return 0;
    };
    const std::size_t date_col = find(kDateColumn);
    std::vector<std::size_t> cols;
    for (const auto& name : kWeatherColumns) cols.push_back(find(name));
    if (!missing.empty()) throw SchemaError(missing);

    RawTable raw;
    raw.columns.assign(kWeatherColumns.begin(), kWeatherColumns.end());
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        auto field = [&](std::size_t i) -> std::string_view {
            return i < fields.size() ? std::string_view(fields[i]) : std::string_view();
        };
        raw.timestamps.push_back(parse_timestamp(field(date_col)));
        for (std::size_t c : cols) values.push_back(parse_number(field(c)));
    }
    raw.values = Tensor({raw.timestamps.size(), cols.size()}, std::move(values));
    return raw;
}

TimeSeriesTable clean(const RawTable& raw, CleanStats* stats) {
    CleanStats local;
    local.input_rows = raw.rows();
    const std::size_t d = raw.columns.size();

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        bool ok = raw.timestamps[i].has_value();
        for (std::size_t j = 0; ok && j < d; ++j) ok = std::isfinite(raw.values(i, j));
        if (ok) {
            keep.push_back(i);
        } else {
            ++local.dropped_invalid;
        }
    }
    std::stable_sort(keep.begin(), keep.end(),
                     [&](std::size_t a, std::size_t b) { return *raw.timestamps[a] < *raw.timestamps[b]; });

    TimeSeriesTable out;
    out.columns = raw.columns;
    std::vector<double> values;
    for (std::size_t i : keep) {
        const std::int64_t ts = *raw.timestamps[i];
        if (!out.timestamps.empty() && out.timestamps.back() == ts) {
            ++local.dropped_duplicate;
            continue;
        }
        out.timestamps.push_back(ts);
        const auto row = raw.values.row(i);
        values.insert(values.end(), row.begin(), row.end());
    }
    if (out.timestamps.empty()) throw DataError("no rows left after cleaning");
    out.values = Tensor({out.timestamps.size(), d}, std::move(values));
    if (stats) *stats = local;
    return out;
}

TimeSeriesTable clean(const TimeSeriesTable& table, CleanStats* stats) {
    RawTable raw;
    raw.columns = table.columns;
    raw.timestamps.assign(table.timestamps.begin(), table.timestamps.end());
    raw.values = table.values;
    return clean(raw, stats);
}

TimeSeriesTable aggregate_daily(const TimeSeriesTable& table, std::size_t min_rows) {
    const std::size_t d = table.cols();
    TimeSeriesTable out;
    out.columns = table.columns;
    std::vector<double> values;
    std::size_t i = 0;
    auto day_of = [](std::int64_t ts) {
        std::int64_t day = ts / kSecondsPerDay;
        if (ts % kSecondsPerDay < 0) --day;
        return day;
    };
    while (i < table.rows()) {
        const std::int64_t day = day_of(table.timestamps[i]);
        std::size_t j = i;
        std::vector<double> sums(d, 0.0);
        while (j < table.rows() && day_of(table.timestamps[j]) == day) {
            for (std::size_t c = 0; c < d; ++c) sums[c] += table.values(j, c);
            ++j;
        }
        const std::size_t n = j - i;
        if (n >= min_rows) {
            out.timestamps.push_back(day * kSecondsPerDay);
            for (double s : sums) values.push_back(s / static_cast<double>(n));
        }
        i = j;
    }
    out.values = Tensor({out.timestamps.size(), d}, std::move(values));
    return out;
}

TimeSeriesTable drop_constant_columns(const TimeSeriesTable& table, std::size_t keep) {
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < table.cols(); ++c) {
        bool constant = true;
        for (std::size_t r = 1; constant && r < table.rows(); ++r) constant = table.values(r, c) == table.values(0, c);
        if (!constant || c == keep) cols.push_back(c);
    }
    TimeSeriesTable out;
    out.timestamps = table.timestamps;
    for (std::size_t c : cols) out.columns.push_back(table.columns[c]);
    std::vector<double> values;
    values.reserve(table.rows() * cols.size());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t c : cols) values.push_back(table.values(r, c));
    }
    out.values = Tensor({table.rows(), cols.size()}, std::move(values));
    return out;
}

void write_csv(const TimeSeriesTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << kDateColumn;
    for (const auto& c : table.columns) out << ',' << c;
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < table.rows(); ++r) {
        out << format_timestamp(table.timestamps[r]);
        for (std::size_t c = 0; c < table.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", table.values(r, c));
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void save_table(const TimeSeriesTable& table, const std::filesystem::path& path) {
    Tensor ts({table.rows()});
    for (std::size_t i = 0; i < table.rows(); ++i) ts[i] = static_cast<double>(table.timestamps[i]);
    nlohmann::json header = {{"columns", table.columns}, {"rows", table.rows()}};
    num::write_container(path, "bttf-table-v1", std::move(header), {{"timestamps", ts}, {"values", table.values}});
}

TimeSeriesTable load_table(const std::filesystem::path& path) {
    const auto c = num::read_container(path, "bttf-table-v1");
    TimeSeriesTable t;
    t.columns = c.header.at("columns").get<std::vector<std::string>>();
    const Tensor& ts = c.at("timestamps");
    for (double v : ts.values()) t.timestamps.push_back(static_cast<std::int64_t>(v));
    t.values = c.at("values");
    if (t.values.rows() != t.timestamps.size() || (t.rows() && t.values.cols() != t.columns.size())) {
        throw DataError("'" + path.string() + "': inconsistent table dimensions");
    }
    return t;
}

std::vector<WindowSample> make_windows(const TimeSeriesTable& table, std::size_t k, std::size_t h,
                                       std::size_t target_index) {
    const std::size_t T = table.rows();
    const std::size_t d = table.cols();
    if (k == 0 || h == 0) throw DataError("window length k and horizon h must be at least 1");
    if (target_index >= d) throw DataError("target column index out of range");
    if (T < k + h) {
        throw DataError("table of " + std::to_string(T) + " rows is too short for k=" + std::to_string(k) +
                        ", h=" + std::to_string(h));
    }
    std::vector<WindowSample> out;
    out.reserve(T - k - h + 1);
    for (std::size_t t = k; t + h <= T; ++t) {
        WindowSample s;
        s.t_index = t;
        s.window = Tensor(k, d);
        for (std::size_t r = 0; r < k; ++r) {
            const auto src = table.values.row(t - k + r);
            std::copy(src.begin(), src.end(), s.window.row(r).begin());
        }
        for (std::size_t c = 0; c < d; ++c) {
            if (c != target_index) s.present.push_back(table.values(t - 1, c));
        }
        for (std::size_t j = 0; j < h; ++j) s.target.push_back(table.values(t + j, target_index));
        out.push_back(std::move(s));
    }
    return out;
}

Tensor NormStats::normalize_window(const Tensor& window) const {
    if (window.cols() != features()) {
        throw ShapeError("window has " + std::to_string(window.cols()) + " features, stats have " +
                         std::to_string(features()));
    }
    Tensor out = window;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = normalize(out(r, c), c);
    }
    return out;
}

nlohmann::json to_json(const NormStats& stats) {
    std::vector<int> constant(stats.constant.begin(), stats.constant.end());
    return {{"mean", stats.mean},
            {"std", stats.stddev},
            {"constant", constant},
            {"target_index", stats.target_index},
            {"std_kind", "population"}};
}

NormStats norm_stats_from_json(const nlohmann::json& j) {
    NormStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("std").get<std::vector<double>>();
    for (int c : j.at("constant").get<std::vector<int>>()) s.constant.push_back(c != 0);
    s.target_index = j.at("target_index").get<std::size_t>();
    if (s.stddev.size() != s.mean.size() || s.constant.size() != s.mean.size()) {
        throw DataError("normalization statistics have inconsistent lengths");
    }
    return s;
}

NormStats fit_stats(const Tensor& rows, std::size_t target_index) {
    const std::size_t n = rows.rows(), d = rows.cols();
    if (n == 0) throw DataError("cannot fit normalization statistics on zero rows");
    if (target_index >= d) throw DataError("target column index out of range");
    NormStats s;
    s.target_index = target_index;
    for (std::size_t c = 0; c < d; ++c) {
        double mu = 0.0;
        for (std::size_t r = 0; r < n; ++r) mu += rows(r, c);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) var += (rows(r, c) - mu) * (rows(r, c) - mu);
        var /= static_cast<double>(n);
        const double sd = std::sqrt(var);
        if (sd > 0.0) {
            s.mean.push_back(mu);
            s.stddev.push_back(sd);
            s.constant.push_back(false);
        } else {
            s.mean.push_back(0.0);
            s.stddev.push_back(1.0);
            s.constant.push_back(true);
            s.warnings.push_back("feature " + std::to_string(c) + " is constant; passed through unscaled");
        }
    }
    return s;
}

NormStats normalize_fit(std::span<const WindowSample> train, std::size_t target_index) {
    if (train.empty()) throw DataError("cannot fit normalization statistics on an empty training split");
    const std::size_t k = train.front().window.rows();
    const std::size_t d = train.front().window.cols();
    // rows are identified by absolute table index so overlapping windows count once
    std::map<std::size_t, std::span<const double>> rows;
    for (const auto& s : train) {
        for (std::size_t r = 0; r < k; ++r) rows.emplace(s.t_index - k + r, s.window.row(r));
    }
    Tensor m(rows.size(), d);
    std::size_t i = 0;
    for (const auto& [idx, row] : rows) std::copy(row.begin(), row.end(), m.row(i++).begin());
    return fit_stats(m, target_index);
}

std::vector<WindowSample> normalize_apply(const NormStats& stats, std::span<const WindowSample> samples) {
    std::vector<WindowSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        WindowSample z;
        z.t_index = s.t_index;
        z.window = stats.normalize_window(s.window);
        std::size_t p = 0;
        for (std::size_t c = 0; c < stats.features(); ++c) {
            if (c == stats.target_index) continue;
            if (p >= s.present.size()) throw ShapeError("present vector shorter than the statistics");
            z.present.push_back(stats.normalize(s.present[p++], c));
        }
        for (double y : s.target) z.target.push_back(stats.normalize_target(y));
        out.push_back(std::move(z));
    }
    return out;
}

std::vector<std::string> validate(const SplitSpec& spec) {
    std::vector<std::string> issues;
    if (!(spec.train > 0.0)) issues.push_back("split.train: must be positive");
    if (!(spec.val > 0.0)) issues.push_back("split.val: must be positive");
    if (!(spec.test > 0.0)) issues.push_back("split.test: must be positive");
    if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) issues.push_back("split: fractions must sum to 1");
    return issues;
}

SplitBounds split_bounds(std::size_t n, const SplitSpec& spec) {
    if (auto issues = validate(spec); !issues.empty()) throw ConfigError(issues.front());
    // the small slack absorbs representation error, e.g. 100 * 0.7 = 69.999...
    auto count = [&](double fraction) {
        return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
    };
    SplitBounds b;
    b.total = n;
    b.train_end = std::min(n, count(spec.train));
    b.val_end = std::min(n, b.train_end + count(spec.val));
    if (b.train_end == 0 || b.val_end == b.train_end || b.val_end == n) {
        throw ConfigError("split of " + std::to_string(n) + " samples leaves an empty train, val or test segment");
    }
    return b;
}

Splits chrono_split(std::span<const WindowSample> samples, const SplitSpec& spec) {
    Splits s;
    s.bounds = split_bounds(samples.size(), spec);
    s.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(s.bounds.train_end));
    s.val.assign(samples.begin() + static_cast<std::ptrdiff_t>(s.bounds.train_end),
                 samples.begin() + static_cast<std::ptrdiff_t>(s.bounds.val_end));
    s.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(s.bounds.val_end), samples.end());
    return s;
}

std::vector<std::string> validate(const DataOptions& opts) {
    std::vector<std::string> issues;
    if (opts.k < 1) issues.push_back("data.k: must be at least 1");
    if (opts.h < 1) issues.push_back("data.h: must be at least 1");
    if (opts.target.empty()) issues.push_back("data.target: must name a column");
    if (opts.granularity == DataOptions::Granularity::daily && opts.min_rows_per_day < 1) {
        issues.push_back("data.min_rows_per_day: must be at least 1");
    }
    return issues;
}

nlohmann::json to_json(const DataOptions& opts) {
    return {{"granularity", opts.granularity == DataOptions::Granularity::daily ? "daily" : "hourly"},
            {"k", opts.k},
            {"h", opts.h},
            {"target", opts.target},
            {"drop_constant", opts.drop_constant},
            {"min_rows_per_day", opts.min_rows_per_day}};
}

DataOptions data_options_from_json(const nlohmann::json& j) {
    DataOptions o;
    const std::string g = j.value("granularity", "daily");
    if (g == "daily") {
        o.granularity = DataOptions::Granularity::daily;
    } else if (g == "hourly") {
        o.granularity = DataOptions::Granularity::hourly;
        o.k = 168;
    } else {
        throw ConfigError("data.granularity: expected \"daily\" or \"hourly\", got \"" + g + "\"");
    }
    o.k = j.value("k", o.k);
    o.h = j.value("h", o.h);
    o.target = j.value("target", o.target);
    o.drop_constant = j.value("drop_constant", o.drop_constant);
    o.min_rows_per_day = j.value("min_rows_per_day", o.min_rows_per_day);
    return o;
}

TimeSeriesTable prepare_table(const TimeSeriesTable& cleaned, const DataOptions& opts) {
    TimeSeriesTable t = opts.granularity == DataOptions::Granularity::daily
                            ? aggregate_daily(cleaned, opts.min_rows_per_day)
                            : cleaned;
    if (opts.drop_constant) t = drop_constant_columns(t, t.column_index(opts.target));
    return t;
}

PreparedData prepare(const TimeSeriesTable& cleaned, const DataOptions& opts, const SplitSpec& split) {
    PreparedData p;
    p.table = prepare_table(cleaned, opts);
    p.target_index = p.table.column_index(opts.target);
    for (std::size_t c = 0; c < p.table.cols(); ++c) {
        if (c != p.target_index) p.present_names.push_back(p.table.columns[c]);
    }
    const auto samples = make_windows(p.table, opts.k, opts.h, p.target_index);
    p.splits = chrono_split(samples, split);
    p.stats = normalize_fit(p.splits.train, p.target_index);
    return p;
}

TimeSeriesTable synthetic_weather(std::size_t days, std::uint64_t seed) {
    num::Rng rng(seed, 0x5eed);
    const double two_pi = 2.0 * std::numbers::pi;
    // 2006-01-01 00:00 UTC
    const std::int64_t start = 13149 * kSecondsPerDay;

    TimeSeriesTable t;
    t.columns.assign(kWeatherColumns.begin(), kWeatherColumns.end());
    std::vector<double> values;
    values.reserve(days * 24 * 8);

    double a1 = 0.0, a2 = 0.0;           // anomaly state
    double hum_prev = 0.75, wind_prev = 10.0;
    for (std::size_t d = 0; d < days; ++d) {
        const double season = 11.0 + 10.0 * std::sin(two_pi * static_cast<double>(d) / 365.25 - 1.9);
        const double anomaly = 1.2 * a1 - 0.35 * a2 + 1.4 * rng.normal();
        a2 = a1;
        a1 = anomaly;
        // yesterday's humid, windy days cool today sharply
        const double front = (hum_prev > 0.8 && wind_prev > 13.0) ? -3.0 : 0.0;
        const double temp = season + anomaly + front + 0.6 * rng.normal();
        const double humidity = std::clamp(0.74 - 0.012 * anomaly + 0.09 * rng.normal(), 0.25, 1.0);
        const double wind = 10.0 + 4.5 * std::abs(rng.normal()) + 2.0 * rng.normal();
        const double bearing = std::floor(rng.uniform(0.0, 360.0));
        const double visibility = std::clamp(10.5 - (humidity > 0.9 ? 4.0 : 0.0) + 1.2 * rng.normal(), 0.0, 16.1);
        const double pressure = 1015.0 - 0.6 * anomaly + 4.0 * rng.normal();
        const double apparent = temp - (temp < 10.0 ? 0.12 * wind : 0.0) + 0.4 * rng.normal();
        hum_prev = humidity;
        wind_prev = wind;

        for (int hr = 0; hr < 24; ++hr) {
            const double diurnal = std::sin(two_pi * (hr - 9) / 24.0);
            t.timestamps.push_back(start + static_cast<std::int64_t>(d) * kSecondsPerDay + hr * 3600);
            values.push_back(temp + 4.0 * diurnal);
            values.push_back(apparent + 4.0 * diurnal);
            values.push_back(std::clamp(humidity - 0.08 * diurnal, 0.0, 1.0));
            values.push_back(std::max(0.0, wind + 1.5 * diurnal));
            values.push_back(bearing);
            values.push_back(visibility);
            values.push_back(0.0);
            values.push_back(pressure);
        }
    }
    t.values = Tensor({t.timestamps.size(), 8}, std::move(values));
    return t;
}

}  // namespace bttf::data
