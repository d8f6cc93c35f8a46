// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace bttf::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major f64 array. Rank is arbitrary but almost everything in the
/// library is rank 2; a rank-1 tensor of length n is treated as 1×n by ops.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);
    Tensor(std::size_t rows, std::size_t cols) : Tensor(Shape{rows, cols}) {}

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }
    static Tensor filled(Shape shape, double value);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor scalar(double value) { return Tensor(Shape{1}, {value}); }
    static Tensor identity(std::size_t n);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    // 2-D view: rank-1 is 1×n, higher ranks collapse leading dims into rows.
    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::span<const double> row(std::size_t r) const { return values().subspan(r * cols(), cols()); }
    std::span<double> row(std::size_t r) { return values().subspan(r * cols(), cols()); }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    const std::vector<double>& storage() const noexcept { return data_; }

    void fill(double value);
    bool all_finite() const noexcept;
    Tensor reshaped(Shape shape) const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace bttf::num
