// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include "bttf/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "bttf/error.hpp"
#include "bttf/pipeline.hpp"

namespace bttf::eval {

using num::Tensor;

namespace {

void check_pair(std::span<const double> pred, std::span<const double> truth, const char* what) {
    if (pred.size() != truth.size()) {
        throw ShapeError(std::string(what) + ": " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " truths");
    }
    if (pred.empty()) throw ShapeError(std::string(what) + ": empty input");
}

double sum_sq_residual(std::span<const double> pred, std::span<const double> truth) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return s;
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred, truth, "rmse");
    return std::sqrt(sum_sq_residual(pred, truth) / static_cast<double>(pred.size()));
}

double ss_tot(std::span<const double> truth) {
    if (truth.empty()) throw ShapeError("ss_tot: empty input");
    double mean = 0.0;
    for (double t : truth) mean += t;
    mean /= static_cast<double>(truth.size());
    double s = 0.0;
    for (double t : truth) s += (t - mean) * (t - mean);
    return s;
}

double r2(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred, truth, "r2");
    if (truth.size() < 2) throw ShapeError("r2: at least 2 samples are required");
    const double tot = ss_tot(truth);
    if (!(tot > 0.0)) throw NumericError("r2: truth is constant, R^2 is undefined");
    return 1.0 - sum_sq_residual(pred, truth) / tot;
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::visionary: return "visionary-only";
        case ModelKind::gbt_one_day: return "gbt-one-day";
        case ModelKind::gbt_time_series: return "gbt-time-series";
        case ModelKind::bttf: return "bttf";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
    for (ModelKind k : {ModelKind::visionary, ModelKind::gbt_one_day, ModelKind::gbt_time_series, ModelKind::bttf}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("suite.kinds: unknown model kind \"" + s +
                      "\" (expected visionary-only, gbt-one-day, gbt-time-series or bttf)");
}

bool has_epochs(ModelKind kind) { return kind == ModelKind::visionary || kind == ModelKind::bttf; }

nlohmann::json MetricReport::to_json() const {
    return {{"run_id", run_id},
            {"kind", to_string(kind)},
            {"epochs", epochs},
            {"rmse", rmse},
            {"r2", r2},
            {"wall_seconds", wall_seconds},
            {"seed", seed},
            {"n_eval", n_eval},
            {"ss_tot", ss_tot},
            {"split", split_label},
            {"split_bounds", {{"train_end", bounds.train_end}, {"val_end", bounds.val_end}, {"total", bounds.total}}},
            {"config", config}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
    MetricReport r;
    try {
        r.run_id = j.at("run_id").get<std::string>();
        r.kind = model_kind_from_string(j.at("kind").get<std::string>());
        r.epochs = j.at("epochs").get<std::size_t>();
        r.rmse = j.at("rmse").get<double>();
        r.r2 = j.at("r2").get<double>();
        r.wall_seconds = j.at("wall_seconds").get<double>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.n_eval = j.at("n_eval").get<std::size_t>();
        r.ss_tot = j.at("ss_tot").get<double>();
        r.split_label = j.at("split").get<std::string>();
        const auto& b = j.at("split_bounds");
        r.bounds = {b.at("train_end").get<std::size_t>(), b.at("val_end").get<std::size_t>(),
                    b.at("total").get<std::size_t>()};
        r.config = j.at("config");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed report: ") + e.what());
    }
    return r;
}

std::span<const PublishedReference> published_references() {
    static const PublishedReference refs[] = {
        {ModelKind::visionary, 5, 3.7, 0.8488, "10m1s"},
        {ModelKind::visionary, 100, 2.5820, 0.9264, "3h6m57s"},
        {ModelKind::visionary, 200, 2.4635, 0.9330, "6h45m59s"},
        {ModelKind::gbt_one_day, 0, 4.4138, 0.7886, "1m42s"},
        {ModelKind::gbt_time_series, 0, 3.9678, 0.8288, "1m42s"},
        {ModelKind::bttf, 5, 4.0695, 0.8192, "3m21s"},
        {ModelKind::bttf, 100, 2.3290, 0.9407, "33m21s"},
        {ModelKind::bttf, 200, 2.2479, 0.9448, "1h3m25s"},
    };
    return refs;
}

std::optional<PublishedReference> published_reference(ModelKind kind, std::size_t epochs) {
    for (const auto& r : published_references()) {
        if (r.kind == kind && r.epochs == epochs) return r;
    }
    return std::nullopt;
}

SuiteConfig parse_suite_config(const nlohmann::json& j) {
    std::vector<std::string> issues = config_issues(j);
    SuiteConfig s;
    if (issues.empty()) {
        s.run = parse_run_config(j);
        const auto it = j.find("suite");
        if (it != j.end()) {
            const auto& sj = *it;
            if (sj.contains("kinds")) {
                s.kinds.clear();
                for (const auto& k : sj["kinds"]) {
                    try {
                        s.kinds.push_back(model_kind_from_string(k.get<std::string>()));
                    } catch (const ConfigError& e) {
                        issues.push_back(e.what());
                    }
                }
                if (sj["kinds"].empty()) issues.push_back("suite.kinds: must not be empty");
            }
            if (sj.contains("epochs")) s.epochs = sj["epochs"].get<std::vector<std::size_t>>();
            if (sj.contains("seeds")) s.seeds = sj["seeds"].get<std::vector<std::uint64_t>>();
            s.resume = sj.value("resume", s.resume);
            s.diagnostics = sj.value("diagnostics", s.diagnostics);
        }
        if (j.contains("seed") && !(it != j.end() && it->contains("seeds"))) s.seeds = {s.run.seed};
        if (s.seeds.empty()) issues.push_back("suite.seeds: must not be empty");
        if (std::find(s.epochs.begin(), s.epochs.end(), std::size_t{0}) != s.epochs.end()) {
            issues.push_back("suite.epochs: every entry must be at least 1");
        }
        const bool epoch_kinds = std::any_of(s.kinds.begin(), s.kinds.end(), has_epochs);
        if (epoch_kinds && s.epochs.empty()) issues.push_back("suite.epochs: must not be empty");
    }
    if (!issues.empty()) {
        std::string msg = "invalid suite config:";
        for (const auto& i : issues) msg += "\n  " + i;
        throw ConfigError(msg);
    }
    return s;
}

nlohmann::json to_json(const SuiteConfig& suite) {
    nlohmann::json j = bttf::to_json(suite.run);
    std::vector<std::string> kinds;
    for (auto k : suite.kinds) kinds.push_back(to_string(k));
    j["suite"] = {{"kinds", kinds},
                  {"epochs", suite.epochs},
                  {"seeds", suite.seeds},
                  {"resume", suite.resume},
                  {"diagnostics", suite.diagnostics}};
    return j;
}

Tensor one_day_features(std::span<const data::WindowSample> samples) {
    if (samples.empty()) return Tensor(0, 0);
    const std::size_t d = samples.front().present.size();
    Tensor x(samples.size(), d);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].present.size() != d) throw ShapeError("one-day features: ragged present vectors");
        for (std::size_t j = 0; j < d; ++j) x(i, j) = samples[i].present[j];
    }
    return x;
}

Tensor time_series_features(std::span<const data::WindowSample> samples, std::size_t target_index) {
    if (samples.empty()) return Tensor(0, 0);
    const std::size_t d = samples.front().present.size();
    const std::size_t k = samples.front().window.rows();
    Tensor x(samples.size(), d + k);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.present.size() != d || s.window.rows() != k) throw ShapeError("time-series features: ragged samples");
        for (std::size_t j = 0; j < d; ++j) x(i, j) = s.present[j];
        for (std::size_t j = 0; j < k; ++j) x(i, d + j) = s.window(j, target_index);
    }
    return x;
}

std::vector<std::string> one_day_names(const data::PreparedData& prepared) { return prepared.present_names; }

std::vector<std::string> time_series_names(const data::PreparedData& prepared, std::size_t k) {
    auto names = prepared.present_names;
    const std::string& target = prepared.table.columns[prepared.target_index];
    for (std::size_t j = 0; j < k; ++j) names.push_back(target + "[t-" + std::to_string(k - j) + "]");
    return names;
}

std::vector<double> first_targets(std::span<const data::WindowSample> samples) {
    std::vector<double> y;
    y.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.target.empty()) throw ShapeError("sample without target");
        y.push_back(s.target[0]);
    }
    return y;
}

namespace {

std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

}  // namespace

void write_importance_csv(const gbt::FeatureImportance& fi, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "rank,feature_index,feature,f_score,total_gain\n";
    std::size_t rank = 1;
    for (std::size_t f : fi.ranking()) {
        out << rank++ << ',' << f << ',' << csv_field(fi.names[f]) << ',' << fi.fscore[f] << ','
            << num17(fi.total_gain[f]) << '\n';
    }
}

void export_diagnostics(const Diagnostics& d, const std::filesystem::path& dir, std::size_t hist_bins) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());
    if (d.truth.size() != d.prediction.size()) throw ShapeError("scatter: truth/prediction length mismatch");

    if (!d.curve.empty()) {
        auto out = open_out(dir / "curves.csv");
        out << "epoch,train_loss,val_loss,epoch_seconds\n";
        for (const auto& r : d.curve) {
            out << r.epoch << ',' << num17(r.train_loss) << ',' << num17(r.val_loss) << ',' << num17(r.seconds) << '\n';
        }
    }
    {
        auto out = open_out(dir / "scatter.csv");
        out << "truth,prediction\n";
        for (std::size_t i = 0; i < d.truth.size(); ++i) out << num17(d.truth[i]) << ',' << num17(d.prediction[i]) << '\n';
    }
    if (!d.train_sq_errors.empty() || !d.val_sq_errors.empty()) {
        double lo = INFINITY, hi = -INFINITY;
        for (const auto* v : {&d.train_sq_errors, &d.val_sq_errors}) {
            for (double e : *v) {
                lo = std::min(lo, e);
                hi = std::max(hi, e);
            }
        }
        const std::size_t bins = hi > lo ? std::max<std::size_t>(hist_bins, 1) : 1;
        const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 0.0;
        auto bin_of = [&](double e) {
            if (width == 0.0) return std::size_t{0};
            return std::min(bins - 1, static_cast<std::size_t>((e - lo) / width));
        };
        std::vector<std::size_t> train(bins, 0), val(bins, 0);
        for (double e : d.train_sq_errors) ++train[bin_of(e)];
        for (double e : d.val_sq_errors) ++val[bin_of(e)];
        auto out = open_out(dir / "loss_hist.csv");
        out << "bin_lo,bin_hi,train_count,val_count\n";
        for (std::size_t b = 0; b < bins; ++b) {
            const double b_lo = lo + width * static_cast<double>(b);
            const double b_hi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
            out << num17(b_lo) << ',' << num17(b_hi) << ',' << train[b] << ',' << val[b] << '\n';
        }
    }
    if (d.importance) write_importance_csv(*d.importance, dir / "importance.csv");
}

std::string format_duration(double seconds) {
    char buf[64];
    if (seconds < 60.0) {
        std::snprintf(buf, sizeof buf, "%.1fs", seconds);
        return buf;
    }
    const auto total = static_cast<long long>(std::llround(seconds));
    const long long h = total / 3600, m = total % 3600 / 60, s = total % 60;
    if (h > 0) {
        std::snprintf(buf, sizeof buf, "%lldh%lldm%llds", h, m, s);
    } else {
        std::snprintf(buf, sizeof buf, "%lldm%llds", m, s);
    }
    return buf;
}

namespace {

const char* display_name(ModelKind k) {
    switch (k) {
        case ModelKind::visionary: return "Visionary (attention forecaster)";
        case ModelKind::gbt_one_day: return "GBT one day";
        case ModelKind::gbt_time_series: return "GBT time series";
        case ModelKind::bttf: return "BTTF";
    }
    return "?";
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string render_table(std::span<const MetricReport> reports) {
    std::ostringstream os;
    os << "| Model | Epochs | Seed | RMSE | R2 | Time | RMSE (paper) | R2 (paper) | Time (paper) |\n";
    os << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : reports) {
        const auto ref = published_reference(r.kind, r.epochs);
        os << "| " << display_name(r.kind) << " | " << (has_epochs(r.kind) ? std::to_string(r.epochs) : "1 (single fit)")
           << " | " << r.seed << " | " << fixed(r.rmse, 4) << " | " << fixed(r.r2, 4) << " | "
           << format_duration(r.wall_seconds) << " | " << (ref ? fixed(ref->rmse, 4) : "-") << " | "
           << (ref ? fixed(ref->r2, 4) : "-") << " | " << (ref ? ref->time : "-") << " |\n";
    }

    // per-cell means when several seeds were run
    std::map<std::pair<int, std::size_t>, std::vector<const MetricReport*>> cells;
    for (const auto& r : reports) cells[{static_cast<int>(r.kind), r.epochs}].push_back(&r);
    const bool multi = std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.second.size() > 1; });
    if (multi) {
        os << "\nMean over seeds:\n\n| Model | Epochs | Runs | RMSE | R2 | RMSE (paper) | R2 (paper) |\n";
        os << "|---|---|---|---|---|---|---|\n";
        for (const auto& [key, rs] : cells) {
            double e = 0.0, q = 0.0;
            for (const auto* r : rs) {
                e += r->rmse;
                q += r->r2;
            }
            const auto n = static_cast<double>(rs.size());
            const auto kind = static_cast<ModelKind>(key.first);
            const auto ref = published_reference(kind, key.second);
            os << "| " << display_name(kind) << " | "
               << (has_epochs(kind) ? std::to_string(key.second) : "1 (single fit)") << " | " << rs.size() << " | "
               << fixed(e / n, 4) << " | " << fixed(q / n, 4) << " | " << (ref ? fixed(ref->rmse, 4) : "-") << " | "
               << (ref ? fixed(ref->r2, 4) : "-") << " |\n";
        }
    }
    if (!reports.empty()) {
        const auto& r = reports.front();
        os << "\nMetrics on the chronological " << r.split_label << " split (n=" << r.n_eval
           << "), original units. Columns marked (paper) are the values reported in the original study, "
              "shown for comparison only.\n";
    }
    return os.str();
}

void write_reports(std::span<const MetricReport> reports, const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(r.to_json());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        auto out = open_out(tmp);
        out << j.dump(2) << '\n';
        if (!out) throw DataError("failed writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

std::vector<MetricReport> read_reports(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    std::vector<MetricReport> out;
    for (const auto& r : j) out.push_back(MetricReport::from_json(r));
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string run_id(ModelKind kind, std::size_t epochs, std::uint64_t seed) {
    std::string id = to_string(kind);
    if (has_epochs(kind)) id += "-e" + std::to_string(epochs);
    return id + "-s" + std::to_string(seed);
}

struct Cell {
    ModelKind kind;
    std::size_t epochs;
    std::uint64_t seed;
    std::string id;
    nlohmann::json config;
};

std::vector<double> squared_errors(std::span<const double> pred, std::span<const double> truth) {
    std::vector<double> e(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) e[i] = (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return e;
}

std::vector<double> visionary_first_step(const visionary::VisionaryModel& m,
                                         std::span<const data::WindowSample> samples) {
    std::vector<Tensor> windows;
    windows.reserve(samples.size());
    for (const auto& s : samples) windows.push_back(s.window);
    std::vector<double> out;
    for (const auto& f : m.forecast_batch(windows)) out.push_back(f.front());
    return out;
}

std::vector<double> adjusted(const std::vector<pipeline::AdjustedState>& states) {
    std::vector<double> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(s.x_adjusted);
    return out;
}

class Runner {
public:
    Runner(const data::TimeSeriesTable& cleaned, const SuiteConfig& suite,
           const std::optional<std::filesystem::path>& out_dir, const Logger& log)
        : suite_(suite), out_dir_(out_dir), log_(log) {
        prepared_ = data::prepare(cleaned, suite.run.data, suite.run.split);
        layout_ = pipeline::make_layout(prepared_, suite.run.data.h);
        truth_ = first_targets(prepared_.splits.test);
        train_truth_ = first_targets(prepared_.splits.train);
        val_truth_ = first_targets(prepared_.splits.val);
        for (const auto& w : prepared_.stats.warnings) say("warning: " + w);
        if (out_dir_) {
            std::filesystem::create_directories(*out_dir_);
            const auto path = *out_dir_ / "reports.json";
            if (suite.resume && std::filesystem::exists(path)) {
                for (auto& r : read_reports(path)) cached_.emplace(r.run_id, std::move(r));
            }
        }
    }

    BenchmarkOutput run() {
        std::vector<Cell> cells;
        for (auto seed : suite_.seeds) {
            for (auto kind : suite_.kinds) {
                if (has_epochs(kind)) {
                    for (auto e : suite_.epochs) cells.push_back(make_cell(kind, e, seed));
                } else {
                    cells.push_back(make_cell(kind, 0, seed));
                }
            }
        }
        for (const auto& c : cells) order_.push_back(c.id);

        for (auto seed : suite_.seeds) {
            for (const auto& c : cells) {
                if (c.seed == seed && !has_epochs(c.kind) && !reuse(c)) run_tree(c);
            }
            run_epoch_cells(cells, seed);
        }
        BenchmarkOutput out;
        for (const auto& id : order_) out.reports.push_back(done_.at(id));
        out.table = render_table(out.reports);
        if (out_dir_) {
            auto f = open_out(*out_dir_ / "table.md");
            f << out.table;
        }
        return out;
    }

private:
    Cell make_cell(ModelKind kind, std::size_t epochs, std::uint64_t seed) const {
        RunConfig rc = run_config(seed);
        if (has_epochs(kind)) rc.visionary.epochs = epochs;
        nlohmann::json cfg = bttf::to_json(rc);
        cfg["kind"] = to_string(kind);
        return {kind, epochs, seed, run_id(kind, epochs, seed), std::move(cfg)};
    }

    RunConfig run_config(std::uint64_t seed) const {
        RunConfig rc = suite_.run;
        rc.seed = seed;
        rc.visionary.seed = seed;
        rc.gbt.seed = seed;
        rc.visionary.target_index = prepared_.target_index;
        return rc;
    }

    bool reuse(const Cell& c) {
        auto it = cached_.find(c.id);
        if (it == cached_.end() || it->second.config != c.config) return false;
        say("cached " + c.id);
        done_[c.id] = it->second;
        return true;
    }

    void say(const std::string& msg) const {
        if (log_) log_(msg);
    }

    void finish(const Cell& c, std::span<const double> pred, double seconds, Diagnostics diag) {
        MetricReport r;
        r.run_id = c.id;
        r.kind = c.kind;
        r.epochs = c.epochs;
        r.rmse = rmse(pred, truth_);
        r.r2 = r2(pred, truth_);
        r.wall_seconds = seconds;
        r.seed = c.seed;
        r.n_eval = truth_.size();
        r.ss_tot = ss_tot(truth_);
        r.bounds = prepared_.splits.bounds;
        r.config = c.config;
        done_[c.id] = r;
        char line[200];
        std::snprintf(line, sizeof line, "%-28s rmse %.4f  r2 %.4f  %s", c.id.c_str(), r.rmse, r.r2,
                      format_duration(seconds).c_str());
        say(line);
        if (out_dir_) {
            if (suite_.diagnostics) {
                diag.truth = truth_;
                diag.prediction.assign(pred.begin(), pred.end());
                export_diagnostics(diag, *out_dir_ / "cells" / c.id);
            }
            persist();
        }
    }

    void persist() {
        std::vector<MetricReport> all;
        for (const auto& id : order_) {
            if (auto it = done_.find(id); it != done_.end()) all.push_back(it->second);
        }
        // keep unrelated cached cells so an edited suite does not discard them
        for (const auto& [id, r] : cached_) {
            if (!done_.count(id) && std::find(order_.begin(), order_.end(), id) == order_.end()) all.push_back(r);
        }
        write_reports(all, *out_dir_ / "reports.json");
    }

    void run_tree(const Cell& c) {
        const RunConfig rc = run_config(c.seed);
        const auto& sp = prepared_.splits;
        const bool one_day = c.kind == ModelKind::gbt_one_day;
        auto features = [&](std::span<const data::WindowSample> s) {
            return one_day ? one_day_features(s) : time_series_features(s, prepared_.target_index);
        };
        const auto names = one_day ? one_day_names(prepared_) : time_series_names(prepared_, rc.data.k);
        const auto t0 = Clock::now();
        const auto fit = gbt::fit_gbt(features(sp.train), train_truth_, rc.gbt, names);
        const auto pred = fit.model.predict_batch(features(sp.test));
        const double seconds = since(t0);
        Diagnostics d;
        if (suite_.diagnostics && out_dir_) {
            d.train_sq_errors = squared_errors(fit.model.predict_batch(features(sp.train)), train_truth_);
            d.val_sq_errors = squared_errors(fit.model.predict_batch(features(sp.val)), val_truth_);
        }
        d.importance = gbt::feature_importance(fit.model);
        finish(c, pred, seconds, std::move(d));
    }

    void run_epoch_cells(const std::vector<Cell>& cells, std::uint64_t seed) {
        std::vector<const Cell*> pending;
        for (const auto& c : cells) {
            if (c.seed == seed && has_epochs(c.kind) && !reuse(c)) pending.push_back(&c);
        }
        if (pending.empty()) return;
        std::size_t max_epoch = 0;
        for (const auto* c : pending) max_epoch = std::max(max_epoch, c->epochs);

        RunConfig rc = run_config(seed);
        rc.visionary.epochs = max_epoch;
        const auto& sp = prepared_.splits;
        say("training visionary for seed " + std::to_string(seed) + " to " + std::to_string(max_epoch) + " epochs");

        // Evaluation happens inside the callback; its cost is excluded from
        // the training clock so each snapshot's time equals a run stopped there.
        double train_clock = 0.0;
        visionary::LearningCurve curve;
        auto on_epoch = [&](const visionary::VisionaryModel& model, const visionary::EpochRecord& rec) {
            train_clock += rec.seconds;
            curve.push_back(rec);
            for (const auto* c : pending) {
                if (c->epochs != rec.epoch) continue;
                if (c->kind == ModelKind::visionary) {
                    eval_visionary(*c, model, train_clock, curve);
                } else {
                    eval_bttf(*c, model, rc, train_clock, curve);
                }
            }
        };
        visionary::train_visionary(sp.train, sp.val, rc.visionary, prepared_.stats, on_epoch);
    }

    void eval_visionary(const Cell& c, const visionary::VisionaryModel& model, double train_seconds,
                        const visionary::LearningCurve& curve) {
        const auto t0 = Clock::now();
        const auto pred = visionary_first_step(model, prepared_.splits.test);
        const double seconds = train_seconds + since(t0);
        Diagnostics d;
        d.curve = curve;
        if (suite_.diagnostics && out_dir_) {
            d.train_sq_errors = squared_errors(visionary_first_step(model, prepared_.splits.train), train_truth_);
            d.val_sq_errors = squared_errors(visionary_first_step(model, prepared_.splits.val), val_truth_);
        }
        finish(c, pred, seconds, std::move(d));
    }

    void eval_bttf(const Cell& c, const visionary::VisionaryModel& model, const RunConfig& rc, double train_seconds,
                   const visionary::LearningCurve& curve) {
        const auto& sp = prepared_.splits;
        const auto t0 = Clock::now();
        auto forecaster = std::make_shared<const visionary::VisionaryModel>(model);
        const auto bttf =
            pipeline::fit_decision_stage(forecaster, sp.train, rc.bttf(), layout_, prepared_.stats);
        const auto pred = adjusted(pipeline::predict_bttf_batch(bttf, sp.test));
        const double seconds = train_seconds + since(t0);
        Diagnostics d;
        d.curve = curve;
        if (suite_.diagnostics && out_dir_) {
            d.train_sq_errors = squared_errors(adjusted(pipeline::predict_bttf_batch(bttf, sp.train)), train_truth_);
            d.val_sq_errors = squared_errors(adjusted(pipeline::predict_bttf_batch(bttf, sp.val)), val_truth_);
        }
        d.importance = gbt::feature_importance(bttf.decision);
        finish(c, pred, seconds, std::move(d));
    }

    const SuiteConfig& suite_;
    std::optional<std::filesystem::path> out_dir_;
    Logger log_;
    data::PreparedData prepared_;
    pipeline::FeatureLayout layout_;
    std::vector<double> truth_, train_truth_, val_truth_;
    std::map<std::string, MetricReport> cached_;
    std::map<std::string, MetricReport> done_;
    std::vector<std::string> order_;
};

}  // namespace

BenchmarkOutput run_benchmark(const data::TimeSeriesTable& cleaned, const SuiteConfig& suite,
                              const std::optional<std::filesystem::path>& out_dir, const Logger& log) {
    return Runner(cleaned, suite, out_dir, log).run();
}

}  // namespace bttf::eval
