// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bttf/tensor.hpp"

namespace bttf::num {

/// A trainable tensor with its accumulated gradient. Owned by models; a
/// graph only refers to it for the duration of one step.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
    void zero_grad() { grad = Tensor(value.shape()); }
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
    Graph* graph = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

/// Tape of operations in creation order. Creation order is a topological
/// order since a node can only consume nodes that already exist.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, std::size_t self)>;

    struct Node {
        std::string op;
        std::vector<std::size_t> inputs;
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        Parameter* param = nullptr;
        Tensor aux;  // state saved by the forward pass (attention weights, normalizer stats)
        BackwardFn backward;
    };

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value);
    Var input(Tensor value, bool requires_grad = true);
    Var param(Parameter& p);

    /// Appends an op node. `requires_grad` is inherited from the inputs.
    Var record(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward, Tensor aux = {});

    /// Reverse sweep from a scalar loss. Node gradients are recomputed from
    /// scratch; parameter gradients are accumulated (+=) into Parameter::grad.
    void backward(Var loss);

    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(std::size_t id) const { return nodes_.at(id); }
    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    const Tensor& aux(std::size_t id) const { return nodes_.at(id).aux; }
    const Tensor& grad(std::size_t id) const { return nodes_.at(id).grad; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

    /// Gradient buffer of an input, allocated on first use. Ops call this
    /// only for inputs that require grad.
    Tensor& grad_buffer(std::size_t id);

private:
    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph->value(id); }

}  // namespace bttf::num
