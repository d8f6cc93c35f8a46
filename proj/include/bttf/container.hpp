// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bttf/tensor.hpp"

namespace bttf::num {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Binary tensor container.
///
///   u64 little-endian   length L of the JSON header in bytes
///   L bytes             UTF-8 JSON header
///   blob                f64 values, little-endian, row-major, tensors back to back
///
/// The header is the caller's JSON object plus a "tensors" array of
/// {name, shape, dtype: "f64", offset} where offset counts f64 values from
/// the start of the blob. `format` is stored under "format" and checked on read.
struct Container {
    nlohmann::json header;
    std::vector<NamedTensor> tensors;

    const Tensor& at(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const std::string& format, nlohmann::json header,
                     const std::vector<NamedTensor>& tensors);

/// Throws DataError on I/O failure, a truncated file, or a format tag other than `format`.
Container read_container(const std::filesystem::path& path, const std::string& format);

}  // namespace bttf::num
