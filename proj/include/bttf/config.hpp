// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bttf/dataio.hpp"
#include "bttf/gbt.hpp"
#include "bttf/pipeline.hpp"
#include "bttf/visionary.hpp"

namespace bttf {

/// Everything a run needs; serialized into every report it produces.
struct RunConfig {
    std::uint64_t seed = 42;
    data::DataOptions data;
    data::SplitSpec split;
    visionary::VisionaryConfig visionary;
    gbt::GBTConfig gbt;
    pipeline::AdaptationMode adaptation_mode = pipeline::AdaptationMode::residual;
    std::size_t refit_interval = 0;
    std::string output_dir = "out";

    pipeline::BTTFConfig bttf() const;
};

nlohmann::json to_json(const RunConfig& cfg);

/// Parses and validates a config document. Missing keys keep defaults; the
/// top-level seed overrides the visionary and gbt seeds; data.k/h drive the
/// visionary window. Unknown keys, type errors and invalid values are all
/// collected and reported together in one ConfigError, one field per line.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every issue in `j`, empty when it parses into a valid RunConfig.
std::vector<std::string> config_issues(const nlohmann::json& j);

/// Reads a JSON file. Missing file: ConfigError; syntax error: ConfigError.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace bttf
