// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line entry point: ingest, synth, train, benchmark, predict, importance.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "bttf/config.hpp"
#include "bttf/dataio.hpp"
#include "bttf/error.hpp"
#include "bttf/eval.hpp"
#include "bttf/gbt.hpp"
#include "bttf/kernels.hpp"
#include "bttf/pipeline.hpp"
#include "bttf/visionary.hpp"

namespace fs = std::filesystem;
using namespace bttf;

namespace {

void require_file(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) throw ConfigError(std::string(what) + " '" + p.string() + "' does not exist");
}

// Accepts a raw CSV or a cached table; either way the result is cleaned.
data::TimeSeriesTable load_cleaned(const fs::path& path) {
    require_file(path, "data file");
    if (path.extension() == ".csv") return data::clean(data::ingest_csv(path));
    return data::clean(data::load_table(path));
}

std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

RunConfig config_or_default(const std::string& path) {
    if (path.empty()) return RunConfig{};
    require_file(path, "config file");
    return load_run_config(path);
}

nlohmann::json metrics_json(std::span<const double> pred, std::span<const double> truth) {
    return {{"split", "test"}, {"n", truth.size()}, {"rmse", eval::rmse(pred, truth)}, {"r2", eval::r2(pred, truth)}};
}

int cmd_ingest(const std::string& input, const std::string& out_path, bool as_csv) {
    require_file(input, "input file");
    const auto raw = data::ingest_csv(input);
    data::CleanStats stats;
    const auto cleaned = data::clean(raw, &stats);
    if (as_csv) {
        data::write_csv(cleaned, out_path);
    } else {
        data::save_table(cleaned, out_path);
    }
    std::cout << "input rows " << stats.input_rows << ", dropped invalid " << stats.dropped_invalid
              << ", dropped duplicate timestamps " << stats.dropped_duplicate << ", cleaned rows " << cleaned.rows()
              << '\n';
    return 0;
}

int cmd_synth(std::size_t days, std::uint64_t seed, const std::string& out_path) {
    const auto t = data::synthetic_weather(days, seed);
    if (fs::path(out_path).extension() == ".csv") {
        data::write_csv(t, out_path);
    } else {
        data::save_table(t, out_path);
    }
    std::cout << "wrote " << t.rows() << " hourly rows (" << days << " days) to " << out_path << '\n';
    return 0;
}

void write_curve(const visionary::LearningCurve& curve, const fs::path& dir) {
    eval::Diagnostics d;
    d.curve = curve;
    eval::export_diagnostics(d, dir);
    fs::remove(dir / "scatter.csv");
}

int cmd_train(const std::string& model, const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, const std::string& gbt_features) {
    RunConfig cfg = config_or_default(config_path);
    const auto cleaned = load_cleaned(data_path);
    const auto prepared = data::prepare(cleaned, cfg.data, cfg.split);
    cfg.visionary.target_index = prepared.target_index;
    for (const auto& w : prepared.stats.warnings) std::cerr << "warning: " << w << '\n';
    const fs::path out(out_dir);
    fs::create_directories(out);
    const auto& sp = prepared.splits;
    const auto truth = eval::first_targets(sp.test);
    auto log_epoch = [](const visionary::VisionaryModel&, const visionary::EpochRecord& r) {
        std::fprintf(stderr, "epoch %zu  train %.6f  val %.6f  %.2fs\n", r.epoch, r.train_loss, r.val_loss, r.seconds);
    };

    nlohmann::json run = {{"model", model}, {"config", to_json(cfg)}};
    nlohmann::json metrics;
    if (model == "visionary") {
        auto r = visionary::train_visionary(sp.train, sp.val, cfg.visionary, prepared.stats, log_epoch);
        r.model.save(out / "visionary.bin");
        write_curve(r.curve, out);
        std::vector<num::Tensor> windows;
        for (const auto& s : sp.test) windows.push_back(s.window);
        std::vector<double> pred;
        for (const auto& f : r.model.forecast_batch(windows)) pred.push_back(f.front());
        metrics = metrics_json(pred, truth);
    } else if (model == "gbt") {
        const bool one_day = gbt_features == "one-day";
        auto features = [&](std::span<const data::WindowSample> s) {
            return one_day ? eval::one_day_features(s) : eval::time_series_features(s, prepared.target_index);
        };
        const auto names = one_day ? eval::one_day_names(prepared) : eval::time_series_names(prepared, cfg.data.k);
        const auto fit = gbt::fit_gbt(features(sp.train), eval::first_targets(sp.train), cfg.gbt, names);
        fit.model.save(out / "gbt.json");
        eval::write_importance_csv(gbt::feature_importance(fit.model), out / "importance.csv");
        run["gbt_features"] = gbt_features;
        metrics = metrics_json(fit.model.predict_batch(features(sp.test)), truth);
    } else {
        auto r = pipeline::train_bttf(sp.train, sp.val, cfg.bttf(), prepared.stats,
                                      pipeline::make_layout(prepared, cfg.data.h), log_epoch);
        r.model.metadata = {{"data", data::to_json(cfg.data)}, {"config", to_json(cfg)}};
        r.model.save(out / "bttf.bundle.json");
        write_curve(r.curve, out);
        eval::write_importance_csv(gbt::feature_importance(r.model.decision), out / "importance.csv");
        std::vector<double> pred;
        for (const auto& s : pipeline::predict_bttf_batch(r.model, sp.test)) pred.push_back(s.x_adjusted);
        metrics = metrics_json(pred, truth);
    }
    run["test_metrics"] = metrics;
    write_json(out / "run.json", run);
    std::printf("%s: test rmse %.4f  r2 %.4f  (n=%zu)  -> %s\n", model.c_str(), metrics["rmse"].get<double>(),
                metrics["r2"].get<double>(), truth.size(), out.string().c_str());
    return 0;
}

int cmd_benchmark(const std::string& data_path, const std::string& suite_path, const std::string& out_dir) {
    eval::SuiteConfig suite;
    if (!suite_path.empty()) {
        require_file(suite_path, "suite file");
        suite = eval::parse_suite_config(read_json_file(suite_path));
    }
    const auto cleaned = load_cleaned(data_path);
    const auto result = eval::run_benchmark(cleaned, suite, fs::path(out_dir),
                                            [](const std::string& m) { std::cerr << m << '\n'; });
    write_json(fs::path(out_dir) / "suite.json", eval::to_json(suite));
    std::cout << result.table;
    return 0;
}

int cmd_predict(const std::string& bundle_path, const std::string& data_path, std::size_t from,
                std::optional<std::size_t> steps, std::optional<std::size_t> refit, const std::string& out_path,
                bool include_next) {
    require_file(bundle_path, "model bundle");
    auto model = pipeline::BTTFModel::load(bundle_path);
    data::DataOptions opts;
    if (model.metadata.contains("data")) opts = data::data_options_from_json(model.metadata["data"]);
    const auto table = data::prepare_table(load_cleaned(data_path), opts);
    std::size_t interval = 0;
    if (refit) {
        interval = *refit;
    } else if (model.metadata.contains("config")) {
        interval = model.metadata["config"]["bttf"].value("refit_interval", std::size_t{0});
    }
    const auto states = pipeline::feedback_loop(model, table, interval, {from, steps, include_next});

    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw DataError("cannot write '" + out_path + "'");
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    out << "t,timestamp,x_t,delta,x_adjusted,truth\n";
    for (const auto& s : states) {
        const std::string ts = s.t_index < table.rows() ? data::format_timestamp(table.timestamps[s.t_index]) : "";
        out << s.t_index << ',' << ts << ',' << num17(s.x_t) << ',' << num17(s.delta) << ',' << num17(s.x_adjusted)
            << ',' << (std::isnan(s.truth) ? "" : num17(s.truth)) << '\n';
    }
    if (!out_path.empty()) std::cerr << "wrote " << states.size() << " adjusted states to " << out_path << '\n';
    return 0;
}

int cmd_importance(const std::string& model_path, const std::string& out_path) {
    require_file(model_path, "model file");
    const auto j = read_json_file(model_path);
    const std::string format = j.value("format", "");
    gbt::BoostedTreeModel m;
    if (format == "bttf-gbt-v1") {
        m = gbt::BoostedTreeModel::from_json(j);
    } else if (format == "bttf-bundle-v1") {
        m = pipeline::BTTFModel::load(model_path).decision;
    } else {
        throw DataError("'" + model_path + "' is neither a tree model nor a bundle");
    }
    const auto fi = gbt::feature_importance(m);
    if (out_path.empty()) {
        std::cout << "feature,f_score\n";
        for (auto f : fi.ranking()) std::cout << fi.names[f] << ',' << fi.fscore[f] << '\n';
    } else {
        eval::write_importance_csv(fi, out_path);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bttf: attention forecaster + boosted-tree nowcasting"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "bttf 1.0.0");
    int threads = 0;
    app.add_option("--threads", threads, "Thread budget for parallel kernels (default: BTTF_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);

    std::string input, out, data_path, config_path, model_kind = "bttf", suite_path, model_path,
                                                    gbt_features = "time-series";
    bool as_csv = false, include_next = false;
    std::size_t days = 1500, from = 0;
    std::uint64_t seed = 7;
    std::optional<std::size_t> steps, refit;

    auto* ingest = app.add_subcommand("ingest", "Parse and clean a weather CSV into a cached table");
    ingest->add_option("--input", input, "Weather CSV")->required();
    ingest->add_option("--out", out, "Output table file")->required();
    ingest->add_flag("--csv", as_csv, "Write a cleaned CSV instead of the binary table");

    auto* synth = app.add_subcommand("synth", "Write the synthetic weather surrogate");
    synth->add_option("--days", days, "Number of days (24 hourly rows each)")->check(CLI::PositiveNumber);
    synth->add_option("--seed", seed, "Generator seed");
    synth->add_option("--out", out, "Output file (.csv for CSV, otherwise table)")->required();

    auto* train = app.add_subcommand("train", "Train one model and write its files");
    train->add_option("--model", model_kind, "visionary | gbt | bttf")
        ->check(CLI::IsMember({"visionary", "gbt", "bttf"}));
    train->add_option("--config", config_path, "Run config JSON (defaults if omitted)");
    train->add_option("--data", data_path, "Table file or weather CSV")->required();
    train->add_option("--out", out, "Output directory")->required();
    train->add_option("--gbt-features", gbt_features, "Feature set for --model gbt: one-day | time-series")
        ->check(CLI::IsMember({"one-day", "time-series"}));

    auto* bench = app.add_subcommand("benchmark", "Run the model comparison suite");
    bench->add_option("--data", data_path, "Table file or weather CSV")->required();
    bench->add_option("--suite", suite_path, "Suite config JSON (defaults if omitted)");
    bench->add_option("--out", out, "Output directory")->required();

    auto* predict = app.add_subcommand("predict", "Run the forecast/adapt loop with a trained bundle");
    predict->add_option("--model", model_path, "Bundle file written by train --model bttf")->required();
    predict->add_option("--data", data_path, "Table file or weather CSV")->required();
    predict->add_option("--from", from, "First origin index in the prepared table (clamped to k)");
    predict->add_option("--steps", steps, "Number of states to emit (default: to the end)");
    predict->add_option("--refit-interval", refit, "Override the bundle's refit interval (0 = never)");
    predict->add_flag("--next", include_next, "Also emit the step after the last row (truth unknown)");
    predict->add_option("--out", out, "Output CSV (stdout if omitted)");

    auto* importance = app.add_subcommand("importance", "Dump split-count feature importance");
    importance->add_option("--model", model_path, "Tree model JSON or bundle")->required();
    importance->add_option("--out", out, "Output CSV (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        kernels::set_threads(threads > 0 ? threads : kernels::default_threads());
        if (*ingest) return cmd_ingest(input, out, as_csv);
        if (*synth) return cmd_synth(days, seed, out);
        if (*train) return cmd_train(model_kind, config_path, data_path, out, gbt_features);
        if (*bench) return cmd_benchmark(data_path, suite_path, out);
        if (*predict) return cmd_predict(model_path, data_path, from, steps, refit, out, include_next);
        if (*importance) return cmd_importance(model_path, out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::data);
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::data);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
