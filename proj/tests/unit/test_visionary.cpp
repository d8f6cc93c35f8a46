// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../oracles.hpp"
#include "../test_util.hpp"
#include "bttf/error.hpp"
#include "bttf/gradcheck.hpp"
#include "bttf/visionary.hpp"

using namespace bttf;
using namespace bttf::visionary;
using num::Tensor;

namespace {

VisionaryConfig tiny_config(std::uint64_t seed = 1) {
    VisionaryConfig c;
    c.k = 3;
    c.d_model = 4;
    c.n_heads = 1;
    c.n_layers = 1;
    c.d_ff = 6;
    c.batch_size = 4;
    c.epochs = 1;
    c.seed = seed;
    return c;
}

data::NormStats identity_stats(std::size_t d) {
    data::NormStats s;
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 1.0);
    s.constant.assign(d, false);
    return s;
}

Tensor random_window(num::Rng& rng, std::size_t k, std::size_t d) {
    Tensor w(k, d);
    for (double& v : w.values()) v = rng.normal();
    return w;
}

}  // namespace

TEST_CASE("positional encoding") {
    const Tensor pe = positional_encoding(7, 64);
    CHECK(pe.rows() == 7);
    CHECK(pe.cols() == 64);
    for (std::size_t c = 0; c < 64; ++c) CHECK(pe(0, c) == (c % 2 == 0 ? 0.0 : 1.0));
    CHECK(pe(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
    CHECK(pe(1, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
    CHECK(std::abs(pe(1, 0) - 0.8415) < 1e-4);
    CHECK(std::abs(pe(1, 1) - 0.5403) < 1e-4);
    CHECK(pe(3, 6) == doctest::Approx(std::sin(3.0 / std::pow(10000.0, 6.0 / 64.0))).epsilon(1e-15));
    CHECK_THROWS_AS(positional_encoding(7, 63), ConfigError);
    CHECK_THROWS_AS(positional_encoding(0, 64), ConfigError);
}

TEST_CASE("config validation and json round trip") {
    VisionaryConfig c;
    CHECK(validate(c).empty());
    c.n_heads = 5;
    CHECK(validate(c).size() == 1);
    c.epochs = 0;
    c.k = 0;
    CHECK(validate(c).size() == 3);
    VisionaryConfig d;
    d.loss = Loss::mae;
    d.lr = 0.0123;
    CHECK(visionary_config_from_json(to_json(d)) == d);
    CHECK_THROWS_AS(visionary_config_from_json({{"loss", "huber"}}), ConfigError);
}

TEST_CASE("forward shapes, zero head and positional sensitivity") {
    num::Rng rng(2);
    VisionaryConfig cfg = tiny_config();
    cfg.h = 2;
    VisionaryModel m(cfg, 3, identity_stats(3));
    const Tensor w = random_window(rng, 3, 3);
    CHECK(m.encoder_forward(w).size() == 2);
    CHECK(m.predict_horizon(w).size() == 2);
    CHECK_THROWS_AS(m.encoder_forward(Tensor(4, 3)), ShapeError);

    // rows permuted: same multiset of observations, different order
    Tensor swapped = w;
    for (std::size_t c = 0; c < 3; ++c) std::swap(swapped(0, c), swapped(2, c));
    CHECK(m.encoder_forward(w) != m.encoder_forward(swapped));

    m.parameter("head.weight").value.fill(0.0);
    m.parameter("head.bias").value.fill(0.0);
    for (double v : m.encoder_forward(Tensor(3, 3))) CHECK(v == 0.0);
}

TEST_CASE("attention weights of the model are row-stochastic") {
    num::Rng rng(3);
    VisionaryConfig cfg;
    cfg.k = 7;
    cfg.n_layers = 2;
    VisionaryModel m(cfg, 8, identity_stats(8));
    const auto ws = m.attention_weights(random_window(rng, 7, 8));
    REQUIRE(ws.size() == 2);
    for (const auto& w : ws) {
        CHECK(w.rows() == cfg.n_heads * 7);
        for (std::size_t i = 0; i < w.rows(); ++i) {
            double s = 0.0;
            for (double v : w.row(i)) {
                CHECK(v >= 0.0);
                s += v;
            }
            CHECK(std::abs(s - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("end-to-end gradient of every parameter group") {
    num::Rng rng(5);
    VisionaryConfig cfg = tiny_config(9);
    VisionaryModel m(cfg, 2, identity_stats(2));
    const std::size_t batch = 3;
    Tensor x(batch * cfg.k, 2), y(batch, 1);
    for (double& v : x.values()) v = rng.normal();
    for (double& v : y.values()) v = rng.normal();
    for (auto& p : m.parameters()) {
        num::Parameter* ptr = &p;
        const double err = num::grad_check_params(
            [&](num::Graph& g) { return m.loss(g, x, y, batch); }, std::span<num::Parameter* const>(&ptr, 1));
        INFO(p.name);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("batched forecasts equal single forecasts bitwise") {
    num::Rng rng(6);
    VisionaryConfig cfg;
    VisionaryModel m(cfg, 8, identity_stats(8));
    std::vector<Tensor> windows;
    for (int i = 0; i < 300; ++i) windows.push_back(random_window(rng, 7, 8));
    const auto batch = m.forecast_batch(windows);
    for (std::size_t i = 0; i < windows.size(); i += 37) CHECK(batch[i] == m.predict_horizon(windows[i]));
    CHECK(m.predict_horizon(windows[0]) == m.predict_horizon(windows[0]));
}

TEST_CASE("training memorizes a toy set") {
    const auto table = testutil::sine_table(12, 0.3, 4);
    auto samples = data::make_windows(table, 4, 1, 0);
    samples.resize(8);
    const auto stats = data::normalize_fit(samples, 0);
    VisionaryConfig cfg;
    cfg.k = 4;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.d_ff = 32;
    cfg.batch_size = 8;
    cfg.epochs = 500;
    cfg.lr = 3e-3;
    const auto r = train_visionary(samples, {}, cfg, stats);
    CHECK(r.curve.size() == 500);
    CHECK(r.curve.back().train_loss < 1e-3);
    CHECK(std::isnan(r.curve.back().val_loss));
    CHECK(r.curve.back().train_loss < 0.01 * r.curve.front().train_loss);
}

TEST_CASE("first-epoch loss is near the normalized target variance") {
    const auto table = testutil::sine_table(400, 0.05);
    const auto samples = data::make_windows(table, 7, 1, 0);
    const auto stats = data::normalize_fit(samples, 0);
    VisionaryConfig cfg;
    cfg.epochs = 1;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    const auto r = train_visionary(samples, {}, cfg, stats);
    std::vector<double> z;
    for (const auto& s : samples) z.push_back(stats.normalize_target(s.target[0]));
    const double var = std::pow(oracle::population_std(z), 2);
    CHECK(r.curve[0].train_loss < 3.0 * var);
    CHECK(r.curve[0].train_loss > var / 3.0);
}

TEST_CASE("training is deterministic and the model file round-trips") {
    const auto table = testutil::sine_table(120, 0.1);
    const auto samples = data::make_windows(table, 5, 2, 0);
    const auto sp = data::chrono_split(samples, {});
    const auto stats = data::normalize_fit(sp.train, 0);
    VisionaryConfig cfg;
    cfg.k = 5;
    cfg.h = 2;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.d_ff = 16;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    const auto a = train_visionary(sp.train, sp.val, cfg, stats);
    const auto b = train_visionary(sp.train, sp.val, cfg, stats);
    REQUIRE(a.curve.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.curve[i].train_loss == b.curve[i].train_loss);
        CHECK(a.curve[i].val_loss == b.curve[i].val_loss);
        CHECK(a.curve[i].epoch == i + 1);
    }
    const auto dir = testutil::scratch("visionary");
    a.model.save(dir / "a.bin");
    b.model.save(dir / "b.bin");
    CHECK(testutil::read_file(dir / "a.bin") == testutil::read_file(dir / "b.bin"));
    const auto loaded = VisionaryModel::load(dir / "a.bin");
    CHECK(loaded.config() == cfg);
    CHECK(loaded.norm_stats() == stats);
    for (const auto& s : sp.test) CHECK(loaded.predict_horizon(s.window) == a.model.predict_horizon(s.window));
    CHECK_THROWS_AS(VisionaryModel::load(dir / "missing.bin"), DataError);

    cfg.seed = 43;
    const auto c = train_visionary(sp.train, sp.val, cfg, stats);
    CHECK(c.curve[0].train_loss != a.curve[0].train_loss);
    std::filesystem::remove_all(dir);
}

TEST_CASE("forecast on a noiseless sine beats persistence") {
    const auto table = testutil::sine_table(500);
    const auto samples = data::make_windows(table, 7, 1, 0);
    const auto sp = data::chrono_split(samples, {});
    const auto stats = data::normalize_fit(sp.train, 0);
    VisionaryConfig cfg;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    cfg.epochs = 30;
    cfg.batch_size = 32;
    const auto r = train_visionary(sp.train, sp.val, cfg, stats);
    std::vector<double> pred, persist, truth;
    for (const auto& s : sp.test) {
        pred.push_back(r.model.predict_horizon(s.window)[0]);
        persist.push_back(s.window(6, 0));
        truth.push_back(s.target[0]);
    }
    CHECK(oracle::rmse(pred, truth) < oracle::rmse(persist, truth));
}

TEST_CASE("training error contracts") {
    const auto stats = identity_stats(3);
    VisionaryConfig cfg = tiny_config();
    CHECK_THROWS_AS(train_visionary({}, {}, cfg, stats), DataError);

    const auto table = testutil::sine_table(20);
    auto samples = data::make_windows(table, 3, 1, 0);
    samples[2].target[0] = NAN;
    CHECK_THROWS_AS(train_visionary(samples, {}, cfg, stats), NumericError);

    cfg.n_heads = 3;
    CHECK_THROWS_AS(train_visionary(samples, {}, cfg, stats), ConfigError);
    CHECK_THROWS_AS(VisionaryModel(tiny_config(), 4, stats), ShapeError);
}
