// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#include "bttf/autodiff.hpp"

#include "bttf/error.hpp"

namespace bttf::num {

Var Graph::constant(Tensor value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Graph::input(Tensor value, bool requires_grad) {
    Node n;
    n.op = "input";
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Graph::param(Parameter& p) {
    Node n;
    n.op = "param:" + p.name;
    n.value = p.value;
    n.requires_grad = true;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Graph::record(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward, Tensor aux) {
    Node n;
    n.op = std::move(op);
    n.value = std::move(value);
    n.aux = std::move(aux);
    for (const Var& in : inputs) {
        if (in.graph != this) throw ShapeError("op '" + n.op + "' mixes nodes from different graphs");
        n.inputs.push_back(in.id);
        n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Tensor& Graph::grad_buffer(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Graph::backward(Var loss) {
    if (loss.graph != this) throw ShapeError("loss belongs to another graph");
    if (nodes_.at(loss.id).value.size() != 1) {
        throw ShapeError("backward needs a scalar loss, got " + shape_string(nodes_[loss.id].value.shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor();
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss.id)[0] = 1.0;

    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.empty()) continue;
        if (n.backward) n.backward(*this, i);
        if (n.param) {
            Tensor& acc = n.param->grad;
            if (acc.shape() != n.value.shape()) acc = Tensor(n.value.shape());
            for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += n.grad[j];
        }
    }
}

}  // namespace bttf::num
