// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over dense matrices.
//
// A Var is a shared handle to a graph node. Operations on Vars whose inputs
// require gradients record a closure that pushes the output gradient back to
// the inputs; backward() replays those closures in reverse topological order.
// When no input requires a gradient the op records nothing, so inference runs
// without retaining the graph.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "ullava/matrix.hpp"

namespace ullava::ag {

struct Node {
    Matrix value;
    Matrix grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    Matrix& grad_buffer();
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Matrix& value() const { return node_->value; }
    Matrix& mutable_value() { return node_->value; }
    /// Accumulated gradient; zeros of the value's shape if nothing flowed here.
    const Matrix& grad() const;
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }

    std::size_t rows() const { return node_->value.rows; }
    std::size_t cols() const { return node_->value.cols; }
    double item() const;

    void zero_grad();

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

Var constant(Matrix value);
Var parameter(Matrix value);

/// Seeds d(root)/d(root) = 1 for a 1×1 root and propagates to every leaf.
void backward(const Var& root);

// Elementwise / linear algebra.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// a [m×n] + row [1×n] broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var transpose(const Var& a);

// Activations.
Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var abs(const Var& a);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);
/// Column-wise mean over rows: [m×n] -> [1×n].
Var mean_rows(const Var& a);

// Shape plumbing.
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(const Var& a, const std::vector<std::size_t>& rows);
/// Copy of base with rows at `positions` replaced by the rows of `rows`.
Var scatter_rows(const Var& base, const std::vector<std::size_t>& positions, const Var& rows);
/// out.data[i] = a.data[source[i]]; covers reshape, permutation and element picks.
Var gather_flat(const Var& a, const std::vector<std::size_t>& source, std::size_t rows,
                std::size_t cols);

// Fused layers.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Row-wise softmax where row i only sees columns j <= i.
Var causal_softmax(const Var& scores);
/// Mean over `rows` of -log softmax(logits[row])[target].
Var cross_entropy(const Var& logits, const std::vector<std::size_t>& rows,
                  const std::vector<std::size_t>& targets);
/// Mean binary cross-entropy of logits against targets in {0,1}, log-sum-exp form.
Var bce_with_logits(const Var& logits, const Matrix& targets);

}  // namespace ullava::ag
