// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include "bttf/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "bttf/error.hpp"

namespace bttf {

namespace {

enum class Kind { uint, number, string, boolean, object, uint_array, string_array };

using Schema = std::map<std::string, Kind>;

const std::map<std::string, Schema>& sections() {
    static const std::map<std::string, Schema> s = {
        {"data",
         {{"granularity", Kind::string},
          {"k", Kind::uint},
          {"h", Kind::uint},
          {"target", Kind::string},
          {"drop_constant", Kind::boolean},
          {"min_rows_per_day", Kind::uint}}},
        {"split", {{"train", Kind::number}, {"val", Kind::number}, {"test", Kind::number}}},
        {"visionary",
         {{"k", Kind::uint},
          {"h", Kind::uint},
          {"d_model", Kind::uint},
          {"n_heads", Kind::uint},
          {"n_layers", Kind::uint},
          {"d_ff", Kind::uint},
          {"lr", Kind::number},
          {"beta1", Kind::number},
          {"beta2", Kind::number},
          {"adam_eps", Kind::number},
          {"optimizer", Kind::string},
          {"batch_size", Kind::uint},
          {"epochs", Kind::uint},
          {"seed", Kind::uint},
          {"target_index", Kind::uint},
          {"loss", Kind::string},
          {"dropout", Kind::number}}},
        {"gbt",
         {{"n_rounds", Kind::uint},
          {"max_depth", Kind::uint},
          {"eta", Kind::number},
          {"reg_l1", Kind::number},
          {"reg_l2", Kind::number},
          {"min_gain", Kind::number},
          {"min_leaf", Kind::uint},
          {"seed", Kind::uint}}},
        {"bttf", {{"adaptation_mode", Kind::string}, {"refit_interval", Kind::uint}}},
        {"suite",
         {{"kinds", Kind::string_array},
          {"epochs", Kind::uint_array},
          {"seeds", Kind::uint_array},
          {"resume", Kind::boolean},
          {"diagnostics", Kind::boolean}}},
    };
    return s;
}

bool is_uint(const nlohmann::json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

std::string describe(Kind k) {
    switch (k) {
        case Kind::uint: return "a non-negative integer";
        case Kind::number: return "a number";
        case Kind::string: return "a string";
        case Kind::boolean: return "true or false";
        case Kind::object: return "an object";
        case Kind::uint_array: return "an array of non-negative integers";
        case Kind::string_array: return "an array of strings";
    }
    return "?";
}

bool matches(const nlohmann::json& v, Kind k) {
    switch (k) {
        case Kind::uint: return is_uint(v);
        case Kind::number: return v.is_number();
        case Kind::string: return v.is_string();
        case Kind::boolean: return v.is_boolean();
        case Kind::object: return v.is_object();
        case Kind::uint_array:
            return v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& e) { return is_uint(e); });
        case Kind::string_array:
            return v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& e) { return e.is_string(); });
    }
    return false;
}

void type_check(const nlohmann::json& j, std::vector<std::string>& issues) {
    if (!j.is_object()) {
        issues.push_back("config: top level must be a JSON object");
        return;
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "seed") {
            if (!is_uint(value)) issues.push_back("seed: expected " + describe(Kind::uint));
        } else if (key == "output_dir") {
            if (!value.is_string()) issues.push_back("output_dir: expected " + describe(Kind::string));
        } else if (auto it = sections().find(key); it != sections().end()) {
            if (!value.is_object()) {
                issues.push_back(key + ": expected " + describe(Kind::object));
                continue;
            }
            for (const auto& [field, fv] : value.items()) {
                auto f = it->second.find(field);
                if (f == it->second.end()) {
                    issues.push_back(key + "." + field + ": unknown field");
                } else if (!matches(fv, f->second)) {
                    issues.push_back(key + "." + field + ": expected " + describe(f->second));
                }
            }
        } else {
            issues.push_back(key + ": unknown field");
        }
    }
}

const nlohmann::json& section(const nlohmann::json& j, const char* name) {
    static const nlohmann::json empty = nlohmann::json::object();
    auto it = j.find(name);
    return it == j.end() ? empty : *it;
}

// Builds the config assuming type_check passed; semantic issues are appended.
RunConfig build(const nlohmann::json& j, std::vector<std::string>& issues) {
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    try {
        c.data = data::data_options_from_json(section(j, "data"));
    } catch (const ConfigError& e) {
        issues.push_back(e.what());
    }
    const auto& sp = section(j, "split");
    c.split.train = sp.value("train", c.split.train);
    c.split.val = sp.value("val", c.split.val);
    c.split.test = sp.value("test", c.split.test);

    const auto& vj = section(j, "visionary");
    try {
        c.visionary = visionary::visionary_config_from_json(vj);
    } catch (const ConfigError& e) {
        issues.push_back(e.what());
    }
    if (vj.contains("k") && vj["k"].get<std::size_t>() != c.data.k) {
        issues.push_back("visionary.k: must equal data.k (" + std::to_string(c.data.k) + ")");
    }
    if (vj.contains("h") && vj["h"].get<std::size_t>() != c.data.h) {
        issues.push_back("visionary.h: must equal data.h (" + std::to_string(c.data.h) + ")");
    }
    if (vj.contains("optimizer") && vj["optimizer"] != "adam") issues.push_back("visionary.optimizer: only \"adam\"");
    c.visionary.k = c.data.k;
    c.visionary.h = c.data.h;
    c.gbt = gbt::gbt_config_from_json(section(j, "gbt"));
    if (j.contains("seed")) {
        c.visionary.seed = c.seed;
        c.gbt.seed = c.seed;
    }

    const auto& bj = section(j, "bttf");
    try {
        c.adaptation_mode = pipeline::adaptation_mode_from_string(bj.value("adaptation_mode", std::string("residual")));
    } catch (const ConfigError& e) {
        issues.push_back(e.what());
    }
    c.refit_interval = bj.value("refit_interval", c.refit_interval);

    auto append = [&](std::vector<std::string> more) {
        for (auto& i : more) issues.push_back(std::move(i));
    };
    append(data::validate(c.data));
    append(data::validate(c.split));
    append(visionary::validate(c.visionary));
    append(gbt::validate(c.gbt));
    if (c.output_dir.empty()) issues.push_back("output_dir: must not be empty");
    return c;
}

}  // namespace

pipeline::BTTFConfig RunConfig::bttf() const {
    pipeline::BTTFConfig b;
    b.visionary = visionary;
    b.gbt = gbt;
    b.adaptation_mode = adaptation_mode;
    b.refit_interval = refit_interval;
    return b;
}

nlohmann::json to_json(const RunConfig& c) {
    return {{"seed", c.seed},
            {"data", data::to_json(c.data)},
            {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
            {"visionary", visionary::to_json(c.visionary)},
            {"gbt", gbt::to_json(c.gbt)},
            {"bttf", {{"adaptation_mode", pipeline::to_string(c.adaptation_mode)}, {"refit_interval", c.refit_interval}}},
            {"output_dir", c.output_dir}};
}

std::vector<std::string> config_issues(const nlohmann::json& j) {
    std::vector<std::string> issues;
    type_check(j, issues);
    if (issues.empty()) build(j, issues);
    return issues;
}

RunConfig parse_run_config(const nlohmann::json& j) {
    std::vector<std::string> issues;
    type_check(j, issues);
    if (!issues.empty()) {
        std::string msg = "invalid config:";
        for (const auto& i : issues) msg += "\n  " + i;
        throw ConfigError(msg);
    }
    RunConfig c = build(j, issues);
    if (!issues.empty()) {
        std::string msg = "invalid config:";
        for (const auto& i : issues) msg += "\n  " + i;
        throw ConfigError(msg);
    }
    return c;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_json_file(path)); }

}  // namespace bttf
