// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bttf {

/// Failure categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
    config = 2,   // usage or configuration problem
    data = 3,     // malformed, missing, or inconsistent input data
    numeric = 4,  // NaN/Inf or an undefined quantity
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// A required CSV column is absent. `column()` names it verbatim.
struct SchemaError : DataError {
    explicit SchemaError(std::vector<std::string> columns)
        : DataError(message(columns)), columns_(std::move(columns)) {}
    const std::vector<std::string>& columns() const noexcept { return columns_; }

private:
    static std::string message(const std::vector<std::string>& columns) {
        std::string m = columns.size() == 1 ? "missing required column " : "missing required columns ";
        for (std::size_t i = 0; i < columns.size(); ++i) m += (i ? ", \"" : "\"") + columns[i] + "\"";
        return m;
    }
    std::vector<std::string> columns_;
};

/// Shapes or dimensions of operands disagree; a contract violation by the caller.
struct ShapeError : DataError {
    explicit ShapeError(const std::string& what) : DataError("shape error: " + what) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

}  // namespace bttf
