// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate: one PASS/FAIL/SKIP line per criterion. Exit status is 1
// when any criterion fails. BTTF_WEATHER_CSV points at the Kaggle weather
// file; without it the data-bound criteria run on the synthetic surrogate or
// report SKIP. BTTF_ACCEPT_ONLY=3,7 restricts the run to listed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "bttf/config.hpp"
#include "bttf/dataio.hpp"
#include "bttf/error.hpp"
#include "bttf/eval.hpp"
#include "bttf/gbt.hpp"
#include "bttf/gradcheck.hpp"
#include "bttf/pipeline.hpp"
#include "bttf/rng.hpp"
#include "bttf/visionary.hpp"

namespace fs = std::filesystem;
using namespace bttf;
using Clock = std::chrono::steady_clock;

namespace {

// pinned tolerances
constexpr double kGradTol = 1e-4;
constexpr double kRowSumTol = 1e-9;
constexpr double kLeafGridTol = 1e-3;
constexpr double kObjectiveSlack = 1e-12;  // relative, absorbs summation rounding only
constexpr double kR2IdentityTol = 1e-10;
constexpr double kMetricOracleTol = 1e-10;
constexpr double kMinBttfR2 = 0.85;
constexpr std::size_t kMinKaggleRows = 96440;
constexpr std::size_t kEpochs = 100;
constexpr std::size_t kSurrogateDays = 4000;
constexpr std::uint64_t kSurrogateSeed = 7;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4};

enum class Status { pass, fail, skip };

struct Outcome {
    Status status = Status::pass;
    std::string detail;
};

Outcome fail(std::string d) { return {Status::fail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::skip, std::move(d)}; }
Outcome check(bool ok, std::string d) { return {ok ? Status::pass : Status::fail, std::move(d)}; }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Kaggle file when configured, otherwise the surrogate. Loaded once.
struct Dataset {
    std::optional<fs::path> kaggle;
    data::TimeSeriesTable cleaned;
    std::string label;
};

Dataset& dataset() {
    static Dataset d = [] {
        Dataset out;
        if (const char* p = std::getenv("BTTF_WEATHER_CSV"); p && *p && fs::exists(p)) {
            out.kaggle = fs::path(p);
            out.cleaned = data::clean(data::ingest_csv(*out.kaggle));
            out.label = "kaggle";
        } else {
            out.cleaned = data::clean(data::synthetic_weather(kSurrogateDays, kSurrogateSeed));
            out.label = "surrogate";
        }
        return out;
    }();
    return d;
}

data::PreparedData& prepared() {
    static data::PreparedData p = data::prepare(dataset().cleaned, {}, {});
    return p;
}

// 1 -------------------------------------------------------------------------
Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string worst_name;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        visionary::VisionaryConfig cfg;
        cfg.k = 3;
        cfg.d_model = 4;
        cfg.n_heads = 1;
        cfg.n_layers = 1;
        cfg.d_ff = 8;
        cfg.seed = seed;
        const std::size_t d_in = 8, batch = 2;
        data::NormStats stats;
        stats.mean.assign(d_in, 0.0);
        stats.stddev.assign(d_in, 1.0);
        stats.constant.assign(d_in, false);
        visionary::VisionaryModel model(cfg, d_in, stats);
        num::Rng rng(seed, 1);
        num::Tensor x(batch * cfg.k, d_in), y(batch, cfg.h);
        for (double& v : x.values()) v = rng.normal();
        for (double& v : y.values()) v = rng.normal();
        for (auto& p : model.parameters()) {
            num::Parameter* ptr = &p;
            const double err = num::grad_check_params([&](num::Graph& g) { return model.loss(g, x, y, batch); },
                                                      std::span<num::Parameter* const>(&ptr, 1));
            if (!(err <= worst)) {
                worst = err;
                worst_name = p.name + " seed " + std::to_string(seed);
            }
        }
    }
    const double seconds = since(t0);
    return check(worst < kGradTol && seconds < 10.0,
                 fmt("max rel err %.3g (%s), tol %.0e, %.2fs (limit 10s)", worst, worst_name.c_str(), kGradTol,
                     seconds));
}

// 2 -------------------------------------------------------------------------
Outcome attention_normalization() {
    num::Rng rng(2024);
    double worst = 0.0;
    bool negative = false;
    std::size_t rows = 0;
    for (int c = 0; c < 200; ++c) {
        visionary::VisionaryConfig cfg;
        cfg.k = 2 + rng.below(12);
        const std::size_t heads[] = {1, 2, 4};
        cfg.n_heads = heads[rng.below(3)];
        cfg.d_model = cfg.n_heads * 2 * (1 + rng.below(4));
        cfg.n_layers = 1 + rng.below(2);
        cfg.d_ff = 16;
        cfg.seed = rng.next_u64();
        const std::size_t d_in = 1 + rng.below(8);
        data::NormStats stats;
        stats.mean.assign(d_in, 0.0);
        stats.stddev.assign(d_in, 1.0);
        stats.constant.assign(d_in, false);
        visionary::VisionaryModel model(cfg, d_in, stats);
        // scales up to 1e3 push the logits far outside the safe exp range
        const double scale = std::pow(10.0, rng.uniform(-1.0, 3.0));
        num::Tensor w(cfg.k, d_in);
        for (double& v : w.values()) v = scale * rng.normal();
        for (const auto& a : model.attention_weights(w)) {
            for (std::size_t i = 0; i < a.rows(); ++i) {
                double s = 0.0;
                for (double v : a.row(i)) {
                    negative = negative || !(v >= 0.0);
                    s += v;
                }
                worst = std::max(worst, std::abs(s - 1.0));
                if (!std::isfinite(s)) worst = INFINITY;
                ++rows;
            }
        }
    }
    return check(worst <= kRowSumTol && !negative,
                 fmt("200 cases, %zu rows, max |row sum - 1| %.3g, tol %.0e%s", rows, worst, kRowSumTol,
                     negative ? ", negative weight seen" : ""));
}

// 3 -------------------------------------------------------------------------
Outcome boosting_oracle() {
    const auto t0 = Clock::now();
    num::Rng rng(303);
    std::size_t split_mismatch = 0, compared = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t n = 2 + rng.below(63), d = 1 + rng.below(4);
        num::Tensor x(n, d);
        oracle::Matrix xm(n, std::vector<double>(d));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) xm[i][j] = x(i, j) = std::round(rng.uniform(0, 10) * 2.0) / 2.0;
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = 3.0 * rng.normal() + (xm[i][0] > 5 ? 2.0 : 0.0);
        gbt::GBTConfig cfg;
        cfg.n_rounds = 1;
        cfg.max_depth = 1;
        cfg.reg_l1 = rng.uniform(0, 2);
        cfg.reg_l2 = rng.uniform(0, 1);
        cfg.min_leaf = 1 + rng.below(3);
        const auto fit = gbt::fit_gbt(x, y, cfg);
        double base = 0.0;
        for (double v : y) base += v;
        base /= static_cast<double>(n);
        std::vector<double> g(n), h(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) g[i] = base - y[i];
        const auto brute = oracle::brute_force_split(xm, g, h, cfg.reg_l1, cfg.reg_l2, cfg.min_gain, cfg.min_leaf);
        const auto& root = fit.model.trees[0].nodes[0];
        ++compared;
        if (root.is_leaf() != !brute.found) {
            ++split_mismatch;
            continue;
        }
        if (!brute.found) continue;
        bool same = std::abs(root.gain - brute.gain) <= 1e-9 * std::max(1.0, brute.gain);
        // a partition tie with a different feature is reported by the oracle as runner_up == gain
        if (brute.gain - brute.runner_up > 1e-9 * std::max(1.0, brute.gain)) {
            same = same && static_cast<std::size_t>(root.feature) == brute.feature;
            for (std::size_t i = 0; i < n; ++i) same = same && ((xm[i][brute.feature] <= root.threshold) == brute.left[i]);
        }
        if (!same) ++split_mismatch;
    }
    double worst_w = 0.0;
    std::size_t leaves = 0, zeroed = 0;
    for (int c = 0; c < 400; ++c) {
        const double G = rng.uniform(-20, 20), H = rng.uniform(0.5, 30), l1 = rng.uniform(0, 15),
                     l2 = rng.uniform(0, 5);
        const double w = gbt::leaf_weight(G, H, l1, l2);
        worst_w = std::max(worst_w, std::abs(w - oracle::grid_leaf_weight(G, H, l1, l2)));
        zeroed += std::abs(G) <= l1;
        ++leaves;
    }
    const double seconds = since(t0);
    return check(split_mismatch == 0 && worst_w <= kLeafGridTol && seconds < 30.0,
                 fmt("root splits %zu/%zu match brute force; leaf weights max |w - grid| %.2g over %zu cases "
                     "(%zu soft-thresholded to 0), tol %.0e; %.2fs (limit 30s)",
                     compared - split_mismatch, compared, worst_w, leaves, zeroed, kLeafGridTol, seconds));
}

// 4 -------------------------------------------------------------------------
Outcome monotone_objective() {
    num::Rng rng(404);
    std::size_t violations = 0;
    double worst_rise = 0.0;
    for (int ds = 0; ds < 20; ++ds) {
        const std::size_t n = 50 + rng.below(250), d = 1 + rng.below(6);
        num::Tensor x(n, d);
        for (double& v : x.values()) v = rng.uniform(-3, 3);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i)
            y[i] = std::sin(x(i, 0)) * 4.0 + (d > 1 ? x(i, 0) * x(i, d - 1) : 0.0) + rng.normal();
        gbt::GBTConfig cfg;
        cfg.n_rounds = 40;
        cfg.eta = rng.uniform(0.01, 1.0);
        cfg.max_depth = rng.below(7);  // 0 is unlimited
        cfg.reg_l1 = rng.uniform(0, 5);
        cfg.reg_l2 = rng.uniform(0, 2);
        const auto fit = gbt::fit_gbt(x, y, cfg);
        for (std::size_t r = 1; r < fit.objective.size(); ++r) {
            const double rise = fit.objective[r] - fit.objective[r - 1];
            if (rise > kObjectiveSlack * std::max(1.0, std::abs(fit.objective[r - 1]))) ++violations;
            worst_rise = std::max(worst_rise, rise);
        }
    }
    return check(violations == 0, fmt("20 datasets x 40 rounds, %zu increases, largest step change %+.3g "
                                      "(slack %.0e relative)",
                                      violations, worst_rise, kObjectiveSlack));
}

// 5 -------------------------------------------------------------------------
Outcome reduction_identity() {
    const auto& p = prepared();
    const std::size_t k = p.splits.train.front().window.rows();
    pipeline::BTTFConfig cfg;
    cfg.adaptation_mode = pipeline::AdaptationMode::direct;
    const auto model =
        pipeline::fit_decision_stage(std::make_shared<pipeline::PassThroughForecaster>(k, p.target_index),
                                     p.splits.train, cfg, pipeline::make_layout(p, k), p.stats);
    const auto baseline = gbt::fit_gbt(eval::time_series_features(p.splits.train, p.target_index),
                                       eval::first_targets(p.splits.train), cfg.gbt);
    const auto expect = baseline.model.predict_batch(eval::time_series_features(p.splits.test, p.target_index));
    const auto states = pipeline::predict_bttf_batch(model, p.splits.test);
    std::size_t differ = 0;
    for (std::size_t i = 0; i < states.size(); ++i) differ += states[i].x_adjusted != expect[i];
    return check(differ == 0 && states.size() == expect.size(),
                 fmt("[%s] %zu test predictions, %zu differ bitwise", dataset().label.c_str(), states.size(), differ));
}

// 6 -------------------------------------------------------------------------
Outcome streaming_equivalence() {
    const auto& p = prepared();
    pipeline::BTTFConfig cfg;
    cfg.visionary.epochs = 2;
    cfg.visionary.target_index = p.target_index;
    auto model =
        pipeline::train_bttf(p.splits.train, p.splits.val, cfg, p.stats, pipeline::make_layout(p, 1)).model;
    const auto windows = data::make_windows(p.table, model.layout.k, 1, p.target_index);
    const auto batch = pipeline::predict_bttf_batch(model, windows);
    const auto stream = pipeline::feedback_loop(model, p.table, 0);
    std::size_t differ = 0;
    for (std::size_t i = 0; i < std::min(batch.size(), stream.size()); ++i)
        differ += batch[i].x_adjusted != stream[i].x_adjusted || batch[i].delta != stream[i].delta ||
                  batch[i].t_index != stream[i].t_index;
    return check(differ == 0 && batch.size() == stream.size(),
                 fmt("[%s] %zu streamed states vs %zu batch, %zu differ bitwise", dataset().label.c_str(),
                     stream.size(), batch.size(), differ));
}

// 7, 9 share one benchmark run ----------------------------------------------
const eval::BenchmarkOutput& table1_benchmark() {
    static eval::BenchmarkOutput out = [] {
        eval::SuiteConfig suite;
        suite.epochs = {kEpochs};
        suite.seeds = kSeeds;
        suite.diagnostics = false;
        const fs::path dir = fs::temp_directory_path() / "bttf_acceptance_suite";
        fs::remove_all(dir);
        auto r = eval::run_benchmark(dataset().cleaned, suite, dir,
                                     [](const std::string& m) { std::fprintf(stderr, "  %s\n", m.c_str()); });
        std::fprintf(stderr, "%s\n", r.table.c_str());
        return r;
    }();
    return out;
}

Outcome directional_reproduction() {
    const auto t0 = Clock::now();
    const auto& out = table1_benchmark();
    std::size_t ordered = 0;
    double min_r2 = INFINITY;
    std::ostringstream per_seed;
    const bool kaggle = dataset().kaggle.has_value();
    for (auto seed : kSeeds) {
        auto find = [&](eval::ModelKind kind) -> const eval::MetricReport& {
            for (const auto& r : out.reports)
                if (r.kind == kind && r.seed == seed) return r;
            throw std::runtime_error("missing report for seed " + std::to_string(seed));
        };
        const auto& b = find(eval::ModelKind::bttf);
        const auto& v = find(eval::ModelKind::visionary);
        const auto& ts = find(eval::ModelKind::gbt_time_series);
        const auto& od = find(eval::ModelKind::gbt_one_day);
        const bool ok = kaggle ? (b.rmse < v.rmse && v.rmse < ts.rmse && ts.rmse < od.rmse)
                               : (b.rmse < v.rmse && b.rmse < ts.rmse && b.rmse < od.rmse);
        ordered += ok;
        min_r2 = std::min(min_r2, b.r2);
        per_seed << fmt(" s%llu[bttf %.3f vis %.3f ts %.3f od %.3f %s]", static_cast<unsigned long long>(seed),
                        b.rmse, v.rmse, ts.rmse, od.rmse, ok ? "ok" : "no");
    }
    const bool pass_ordering = ordered >= 3;
    return check(pass_ordering && min_r2 >= kMinBttfR2,
                 fmt("[%s, %zu epochs] %s ordering held in %zu/4 seeds (need 3); min BTTF R2 %.4f (need %.2f); "
                     "%.0fs;",
                     dataset().label.c_str(), kEpochs,
                     kaggle ? "BTTF < visionary < gbt-ts < gbt-one-day" : "BTTF below all three standalones",
                     ordered, min_r2, kMinBttfR2, since(t0)) +
                     per_seed.str());
}

// 8 -------------------------------------------------------------------------
Outcome importance_ranking() {
    const auto& p = prepared();
    const auto fit = gbt::fit_gbt(eval::one_day_features(p.splits.train), eval::first_targets(p.splits.train), {},
                                  eval::one_day_names(p));
    const auto fi = gbt::feature_importance(fit.model);
    const auto order = fi.ranking();
    std::string top;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, order.size()); ++i)
        top += fmt("%s%s=%zu", i ? ", " : "", fi.names[order[i]].c_str(), fi.fscore[order[i]]);
    // the ranking is a property of the real weather data; the surrogate's
    // cross-feature term makes humidity and wind split-heavy by design
    if (!dataset().kaggle) return skip("needs BTTF_WEATHER_CSV; surrogate top F-scores: " + top);
    return check(fi.names[order[0]] == "Apparent Temperature (C)", "[kaggle] top F-scores: " + top);
}

// 9 -------------------------------------------------------------------------
Outcome metric_identities() {
    double worst_identity = 0.0;
    const auto& out = table1_benchmark();
    for (const auto& r : out.reports) {
        const double implied = 1.0 - static_cast<double>(r.n_eval) * r.rmse * r.rmse / r.ss_tot;
        worst_identity = std::max(worst_identity, std::abs(r.r2 - implied));
    }
    num::Rng rng(909);
    double worst_rmse = 0.0, worst_r2 = 0.0;
    for (int c = 0; c < 100; ++c) {
        const std::size_t n = 2 + rng.below(500);
        std::vector<double> p(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = 15.0 + 8.0 * rng.normal();
            p[i] = y[i] + 2.0 * rng.normal();
        }
        worst_rmse = std::max(worst_rmse, std::abs(eval::rmse(p, y) - oracle::rmse(p, y)));
        worst_r2 = std::max(worst_r2, std::abs(eval::r2(p, y) - oracle::r2(p, y)));
    }
    return check(worst_identity <= kR2IdentityTol && worst_rmse <= kMetricOracleTol && worst_r2 <= kMetricOracleTol,
                 fmt("%zu reports, max |r2 - (1 - N rmse^2/SStot)| %.2g; oracle max diff rmse %.2g r2 %.2g; tol %.0e",
                     out.reports.size(), worst_identity, worst_rmse, worst_r2, kR2IdentityTol));
}

// 10 ------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
    const auto& p = prepared();
    const fs::path dir = fs::temp_directory_path() / "bttf_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    RunConfig rc;
    rc.visionary.epochs = 3;
    rc.visionary.target_index = p.target_index;
    for (const char* run : {"a", "b"}) {
        auto m = pipeline::train_bttf(p.splits.train, p.splits.val, rc.bttf(), p.stats, pipeline::make_layout(p, 1))
                     .model;
        m.save(dir / (std::string(run) + ".bundle.json"));
    }
    bool files_equal = true;
    for (const char* suffix : {".visionary.bin", ".decision.json"})
        files_equal = files_equal && slurp(dir / (std::string("a") + suffix)) == slurp(dir / (std::string("b") + suffix));

    eval::SuiteConfig suite;
    suite.run = rc;
    suite.epochs = {2};
    suite.seeds = {5};
    suite.diagnostics = false;
    const auto r1 = eval::run_benchmark(dataset().cleaned, suite);
    const auto r2 = eval::run_benchmark(dataset().cleaned, suite);
    std::size_t differ = 0;
    for (std::size_t i = 0; i < r1.reports.size(); ++i) {
        auto strip = [](nlohmann::json j) {
            j.erase("wall_seconds");  // elapsed time is not a function of the inputs
            return j.dump();
        };
        differ += strip(r1.reports[i].to_json()) != strip(r2.reports[i].to_json());
    }
    fs::remove_all(dir);
    return check(files_equal && differ == 0 && r1.reports.size() == r2.reports.size(),
                 fmt("model files %s across runs; %zu/%zu reports differ outside wall time",
                     files_equal ? "identical" : "DIFFER", differ, r1.reports.size()));
}

// 11 ------------------------------------------------------------------------
Outcome data_pipeline() {
    std::size_t law_failures = 0, cases = 0;
    for (std::size_t T = 1; T <= 12; ++T) {
        data::TimeSeriesTable t;
        t.columns = {"y", "x"};
        t.values = num::Tensor(T, 2);
        for (std::size_t r = 0; r < T; ++r) {
            t.timestamps.push_back(static_cast<std::int64_t>(r) * 86400);
            t.values(r, 0) = static_cast<double>(r);
            t.values(r, 1) = -static_cast<double>(r);
        }
        for (std::size_t k = 1; k <= 12; ++k) {
            for (std::size_t h = 1; h <= 12; ++h) {
                ++cases;
                if (T < k + h) {
                    try {
                        data::make_windows(t, k, h, 0);
                        ++law_failures;
                    } catch (const DataError&) {
                    }
                    continue;
                }
                const auto w = data::make_windows(t, k, h, 0);
                bool ok = w.size() == T - k - h + 1;
                for (std::size_t i = 0; ok && i < w.size(); ++i)
                    ok = w[i].t_index == k + i && w[i].window(0, 0) == static_cast<double>(i) &&
                         w[i].target.back() == static_cast<double>(k + i + h - 1);
                law_failures += !ok;
            }
        }
    }
    const std::string law = fmt("window law %zu/%zu (T,k,h) cases ok", cases - law_failures, cases);
    if (!dataset().kaggle) {
        if (law_failures) return fail(law + "; Kaggle ingest not run");
        return skip(law + "; Kaggle ingest needs BTTF_WEATHER_CSV");
    }
    data::CleanStats st;
    const auto cleaned = data::clean(data::ingest_csv(*dataset().kaggle), &st);
    return check(law_failures == 0 && cleaned.rows() >= kMinKaggleRows,
                 law + fmt("; ingest %zu rows, cleaned %zu (need >= %zu), dropped %zu invalid, %zu duplicate",
                           st.input_rows, cleaned.rows(), kMinKaggleRows, st.dropped_invalid, st.dropped_duplicate));
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"gradient correctness", gradient_correctness},
        {"attention normalization", attention_normalization},
        {"boosting oracle equivalence", boosting_oracle},
        {"monotone objective", monotone_objective},
        {"reduction identity", reduction_identity},
        {"streaming/batch equivalence", streaming_equivalence},
        {"directional reproduction", directional_reproduction},
        {"importance ranking", importance_ranking},
        {"metric identities", metric_identities},
        {"determinism", determinism},
        {"data pipeline", data_pipeline},
    };
    std::set<std::size_t> only;
    if (const char* s = std::getenv("BTTF_ACCEPT_ONLY")) {
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) only.insert(std::stoul(tok));
    }
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && !only.count(i + 1)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
        failures += o.status == Status::fail;
        std::printf("criterion %2zu %-28s %s  %s\n", i + 1, criteria[i].first, tag, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures ? 1 : 0;
}
