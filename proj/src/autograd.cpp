// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/autograd.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_set>

#include "ullava/error.hpp"

namespace ullava {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) {
        throw Error(ErrorCode::ShapeMismatch, "matrix data size does not match shape");
    }
}

namespace {

// c += a * b
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* crow = c.data.data() + i * c.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.data[i * a.cols + k];
            if (aik == 0.0) continue;
            const double* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
}

// c += a * b^T
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.data.data() + j * b.cols;
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            c.data[i * c.cols + j] += s;
        }
    }
}

// c += a^T * b
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = a.data.data() + k * a.cols;
        const double* brow = b.data.data() + k * b.cols;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c.data.data() + i * c.cols;
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw Error(ErrorCode::DimMismatch,
                    std::string(op) + ": " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                        " vs " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw Error(ErrorCode::DimMismatch, "matmul: inner dimensions " + std::to_string(a.cols) +
                                                " and " + std::to_string(b.rows));
    }
    Matrix c(a.rows, b.cols);
    gemm_nn(a, b, c);
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

namespace ag {

Matrix& Node::grad_buffer() {
    if (grad.size() != value.size() || grad.rows != value.rows) grad = Matrix(value.rows, value.cols);
    return grad;
}

const Matrix& Var::grad() const {
    return node_->grad_buffer();
}

double Var::item() const {
    if (node_->value.size() != 1) throw Error(ErrorCode::DimMismatch, "item() on non-scalar");
    return node_->value.data[0];
}

void Var::zero_grad() {
    if (node_) node_->grad = Matrix();
}

namespace {
thread_local bool t_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

Var constant(Matrix value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(std::move(n));
}

Var parameter(Matrix value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
}

namespace {

using BackwardFn = std::function<void(Node&)>;

Var make(Matrix value, std::vector<Var> inputs, BackwardFn fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
    if (any && t_grad_enabled) {
        n->requires_grad = true;
        for (auto& v : inputs) n->inputs.push_back(v.node());
        n->backward = std::move(fn);
    }
    return Var(std::move(n));
}

// Input i of a node, or nullptr if it does not take gradients.
Node* grad_input(Node& self, std::size_t i) {
    Node* in = self.inputs[i].get();
    return in->requires_grad ? in : nullptr;
}

template <class F>
Var unary_elementwise(const Var& a, F f, std::function<double(double x, double y)> dfdx) {
    Matrix out = a.value();
    for (auto& x : out.data) x = f(x);
    return make(std::move(out), {a}, [dfdx](Node& self) {
        Node* in = grad_input(self, 0);
        if (!in) return;
        Matrix& g = in->grad_buffer();
        for (std::size_t i = 0; i < g.data.size(); ++i)
            g.data[i] += self.grad.data[i] * dfdx(in->value.data[i], self.value.data[i]);
    });
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

void backward(const Var& root) {
    if (root.value().size() != 1) throw Error(ErrorCode::DimMismatch, "backward() needs a scalar root");
    if (!root.requires_grad()) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->grad_buffer().data[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward) {
            n->grad_buffer();
            n->backward(*n);
        }
    }
}

Var matmul(const Var& a, const Var& b) {
    return make(ullava::matmul(a.value(), b.value()), {a, b}, [](Node& self) {
        Node* a = self.inputs[0].get();
        Node* b = self.inputs[1].get();
        if (a->requires_grad) gemm_nt(self.grad, b->value, a->grad_buffer());
        if (b->requires_grad) gemm_tn(a->value, self.grad, b->grad_buffer());
    });
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "add");
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.value().data[i];
    return make(std::move(out), {a, b}, [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (Node* in = grad_input(self, k)) {
                Matrix& g = in->grad_buffer();
                for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
            }
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "sub");
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.value().data[i];
    return make(std::move(out), {a, b}, [](Node& self) {
        if (Node* in = grad_input(self, 0)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
        }
        if (Node* in = grad_input(self, 1)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] -= self.grad.data[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "mul");
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.value().data[i];
    return make(std::move(out), {a, b}, [](Node& self) {
        Node* a = self.inputs[0].get();
        Node* b = self.inputs[1].get();
        if (a->requires_grad) {
            Matrix& g = a->grad_buffer();
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i] * b->value.data[i];
        }
        if (b->requires_grad) {
            Matrix& g = b->grad_buffer();
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i] * a->value.data[i];
        }
    });
}

Var div(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "div");
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] /= b.value().data[i];
    return make(std::move(out), {a, b}, [](Node& self) {
        Node* a = self.inputs[0].get();
        Node* b = self.inputs[1].get();
        if (a->requires_grad) {
            Matrix& g = a->grad_buffer();
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i] / b->value.data[i];
        }
        if (b->requires_grad) {
            Matrix& g = b->grad_buffer();
            for (std::size_t i = 0; i < g.data.size(); ++i)
                g.data[i] -= self.grad.data[i] * self.value.data[i] / b->value.data[i];
        }
    });
}

namespace {

Var select_elementwise(const Var& a, const Var& b, bool take_min) {
    require_same_shape(a.value(), b.value(), take_min ? "minimum" : "maximum");
    Matrix out = a.value();
    std::vector<unsigned char> from_a(out.size());
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double x = a.value().data[i];
        const double y = b.value().data[i];
        from_a[i] = take_min ? (x <= y) : (x >= y);
        out.data[i] = from_a[i] ? x : y;
    }
    return make(std::move(out), {a, b}, [from_a = std::move(from_a)](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            Node* in = grad_input(self, k);
            if (!in) continue;
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (static_cast<bool>(from_a[i]) == (k == 0)) g.data[i] += self.grad.data[i];
        }
    });
}

}  // namespace

Var minimum(const Var& a, const Var& b) { return select_elementwise(a, b, true); }
Var maximum(const Var& a, const Var& b) { return select_elementwise(a, b, false); }

Var scale(const Var& a, double s) {
    Matrix out = a.value();
    for (auto& x : out.data) x *= s;
    return make(std::move(out), {a}, [s](Node& self) {
        if (Node* in = grad_input(self, 0)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += s * self.grad.data[i];
        }
    });
}

Var add_scalar(const Var& a, double s) {
    Matrix out = a.value();
    for (auto& x : out.data) x += s;
    return make(std::move(out), {a}, [](Node& self) {
        if (Node* in = grad_input(self, 0)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
        }
    });
}

Var add_row(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw Error(ErrorCode::DimMismatch, "add_row: row must be 1x" + std::to_string(a.cols()));
    }
    Matrix out = a.value();
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += row.value().data[j];
    return make(std::move(out), {a, row}, [](Node& self) {
        if (Node* in = grad_input(self, 0)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
        }
        if (Node* in = grad_input(self, 1)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < self.grad.rows; ++i)
                for (std::size_t j = 0; j < self.grad.cols; ++j) g.data[j] += self.grad(i, j);
        }
    });
}

Var transpose(const Var& a) {
    return make(ullava::transpose(a.value()), {a}, [](Node& self) {
        if (Node* in = grad_input(self, 0)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) g(i, j) += self.grad(j, i);
        }
    });
}

Var gelu(const Var& a) {
    return unary_elementwise(
        a,
        [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); },
        [](double x, double) {
            const double t = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
        });
}

Var sigmoid(const Var& a) {
    return unary_elementwise(
        a,
        [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Var relu(const Var& a) {
    return unary_elementwise(
        a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var abs(const Var& a) {
    return unary_elementwise(
        a, [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double x : a.value().data) s += x;
    return make(Matrix::scalar(s), {a}, [](Node& self) {
        if (Node* in = grad_input(self, 0)) {
            Matrix& g = in->grad_buffer();
            for (auto& x : g.data) x += self.grad.data[0];
        }
    });
}

Var mean(const Var& a) {
    if (a.value().size() == 0) throw Error(ErrorCode::DimMismatch, "mean of empty matrix");
    return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var mean_rows(const Var& a) {
    const Matrix& v = a.value();
    if (v.rows == 0) throw Error(ErrorCode::DimMismatch, "mean_rows of empty matrix");
    Matrix out(1, v.cols);
    for (std::size_t i = 0; i < v.rows; ++i)
        for (std::size_t j = 0; j < v.cols; ++j) out.data[j] += v(i, j);
    const double inv = 1.0 / static_cast<double>(v.rows);
    for (auto& x : out.data) x *= inv;
    return make(std::move(out), {a}, [inv](Node& self) {
        if (Node* in = grad_input(self, 0)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) g(i, j) += inv * self.grad.data[j];
        }
    });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
    const Matrix& v = a.value();
    if (begin + count > v.cols) throw Error(ErrorCode::IndexOutOfRange, "slice_cols out of range");
    Matrix out(v.rows, count);
    for (std::size_t i = 0; i < v.rows; ++i)
        for (std::size_t j = 0; j < count; ++j) out(i, j) = v(i, begin + j);
    return make(std::move(out), {a}, [begin, count](Node& self) {
        if (Node* in = grad_input(self, 0)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < count; ++j) g(i, begin + j) += self.grad(i, j);
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error(ErrorCode::DimMismatch, "concat_cols of nothing");
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw Error(ErrorCode::DimMismatch, "concat_cols row mismatch");
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < p.cols(); ++j) out(i, offset + j) = p.value()(i, j);
        offset += p.cols();
    }
    return make(std::move(out), parts, [](Node& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < self.inputs.size(); ++k) {
            Node* in = self.inputs[k].get();
            if (in->requires_grad) {
                Matrix& g = in->grad_buffer();
                for (std::size_t i = 0; i < g.rows; ++i)
                    for (std::size_t j = 0; j < g.cols; ++j) g(i, j) += self.grad(i, offset + j);
            }
            offset += in->value.cols;
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error(ErrorCode::DimMismatch, "concat_rows of nothing");
    const std::size_t cols = parts.front().cols();
    std::vector<double> data;
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw Error(ErrorCode::DimMismatch, "concat_rows column mismatch");
        data.insert(data.end(), p.value().data.begin(), p.value().data.end());
        rows += p.rows();
    }
    return make(Matrix(rows, cols, std::move(data)), parts, [](Node& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < self.inputs.size(); ++k) {
            Node* in = self.inputs[k].get();
            if (in->requires_grad) {
                Matrix& g = in->grad_buffer();
                for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[offset + i];
            }
            offset += in->value.size();
        }
    });
}

Var gather_rows(const Var& a, const std::vector<std::size_t>& rows) {
    const Matrix& v = a.value();
    Matrix out(rows.size(), v.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= v.rows) throw Error(ErrorCode::IndexOutOfRange, "gather_rows index " + std::to_string(rows[i]));
        std::copy_n(v.data.begin() + static_cast<std::ptrdiff_t>(rows[i] * v.cols), v.cols,
                    out.data.begin() + static_cast<std::ptrdiff_t>(i * v.cols));
    }
    return make(std::move(out), {a}, [rows](Node& self) {
        if (Node* in = grad_input(self, 0)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t j = 0; j < g.cols; ++j) g(rows[i], j) += self.grad(i, j);
        }
    });
}

Var scatter_rows(const Var& base, const std::vector<std::size_t>& positions, const Var& rows) {
    const Matrix& b = base.value();
    if (rows.rows() != positions.size() || rows.cols() != b.cols) {
        throw Error(ErrorCode::DimMismatch, "scatter_rows: " + std::to_string(rows.rows()) + " rows for " +
                                                std::to_string(positions.size()) + " positions");
    }
    Matrix out = b;
    std::vector<unsigned char> replaced(b.rows, 0);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] >= b.rows) throw Error(ErrorCode::IndexOutOfRange, "scatter_rows position");
        replaced[positions[i]] = 1;
        for (std::size_t j = 0; j < b.cols; ++j) out(positions[i], j) = rows.value()(i, j);
    }
    return make(std::move(out), {base, rows}, [positions, replaced = std::move(replaced)](Node& self) {
        if (Node* in = grad_input(self, 0)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < g.rows; ++i) {
                if (replaced[i]) continue;
                for (std::size_t j = 0; j < g.cols; ++j) g(i, j) += self.grad(i, j);
            }
        }
        if (Node* in = grad_input(self, 1)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < positions.size(); ++i)
                for (std::size_t j = 0; j < g.cols; ++j) g(i, j) += self.grad(positions[i], j);
        }
    });
}

Var gather_flat(const Var& a, const std::vector<std::size_t>& source, std::size_t rows, std::size_t cols) {
    if (source.size() != rows * cols) throw Error(ErrorCode::DimMismatch, "gather_flat shape");
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (source[i] >= a.value().size()) throw Error(ErrorCode::IndexOutOfRange, "gather_flat index");
        out.data[i] = a.value().data[source[i]];
    }
    return make(std::move(out), {a}, [source](Node& self) {
        if (Node* in = grad_input(self, 0)) {
            Matrix& g = in->grad_buffer();
            for (std::size_t i = 0; i < source.size(); ++i) g.data[source[i]] += self.grad.data[i];
        }
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Matrix& v = x.value();
    const std::size_t n = v.cols;
    if (gamma.rows() != 1 || gamma.cols() != n || !gamma.value().same_shape(beta.value())) {
        throw Error(ErrorCode::DimMismatch, "layer_norm: gamma/beta must be 1x" + std::to_string(n));
    }
    Matrix out(v.rows, n);
    Matrix xhat(v.rows, n);
    std::vector<double> inv_std(v.rows);
    for (std::size_t i = 0; i < v.rows; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += v(i, j);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (v(i, j) - mu) * (v(i, j) - mu);
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat(i, j) = (v(i, j) - mu) * inv_std[i];
            out(i, j) = xhat(i, j) * gamma.value().data[j] + beta.value().data[j];
        }
    }
    return make(std::move(out), {x, gamma, beta},
                [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                    Node* x = self.inputs[0].get();
                    Node* gamma = self.inputs[1].get();
                    Node* beta = self.inputs[2].get();
                    const std::size_t n = xhat.cols;
                    if (gamma->requires_grad) {
                        Matrix& g = gamma->grad_buffer();
                        for (std::size_t i = 0; i < xhat.rows; ++i)
                            for (std::size_t j = 0; j < n; ++j) g.data[j] += self.grad(i, j) * xhat(i, j);
                    }
                    if (beta->requires_grad) {
                        Matrix& g = beta->grad_buffer();
                        for (std::size_t i = 0; i < xhat.rows; ++i)
                            for (std::size_t j = 0; j < n; ++j) g.data[j] += self.grad(i, j);
                    }
                    if (x->requires_grad) {
                        Matrix& g = x->grad_buffer();
                        std::vector<double> dxhat(n);
                        for (std::size_t i = 0; i < xhat.rows; ++i) {
                            double mean_d = 0.0, mean_dx = 0.0;
                            for (std::size_t j = 0; j < n; ++j) {
                                dxhat[j] = self.grad(i, j) * gamma->value.data[j];
                                mean_d += dxhat[j];
                                mean_dx += dxhat[j] * xhat(i, j);
                            }
                            mean_d /= static_cast<double>(n);
                            mean_dx /= static_cast<double>(n);
                            for (std::size_t j = 0; j < n; ++j)
                                g(i, j) += inv_std[i] * (dxhat[j] - mean_d - xhat(i, j) * mean_dx);
                        }
                    }
                });
}

Var causal_softmax(const Var& scores) {
    const Matrix& s = scores.value();
    Matrix out(s.rows, s.cols);
    for (std::size_t i = 0; i < s.rows; ++i) {
        const std::size_t last = std::min(i + 1, s.cols);
        double mx = s(i, 0);
        for (std::size_t j = 1; j < last; ++j) mx = std::max(mx, s(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < last; ++j) {
            out(i, j) = std::exp(s(i, j) - mx);
            z += out(i, j);
        }
        for (std::size_t j = 0; j < last; ++j) out(i, j) /= z;
    }
    return make(std::move(out), {scores}, [](Node& self) {
        Node* in = grad_input(self, 0);
        if (!in) return;
        Matrix& g = in->grad_buffer();
        const Matrix& p = self.value;
        for (std::size_t i = 0; i < p.rows; ++i) {
            const std::size_t last = std::min(i + 1, p.cols);
            double dot = 0.0;
            for (std::size_t j = 0; j < last; ++j) dot += p(i, j) * self.grad(i, j);
            for (std::size_t j = 0; j < last; ++j) g(i, j) += p(i, j) * (self.grad(i, j) - dot);
        }
    });
}

Var cross_entropy(const Var& logits, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& targets) {
    const Matrix& z = logits.value();
    if (rows.empty() || rows.size() != targets.size()) {
        throw Error(ErrorCode::DimMismatch, "cross_entropy needs matching nonempty rows/targets");
    }
    Matrix probs(rows.size(), z.cols);
    double total = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] >= z.rows || targets[k] >= z.cols) throw Error(ErrorCode::IndexOutOfRange, "cross_entropy index");
        auto zr = z.row(rows[k]);
        const double mx = *std::max_element(zr.begin(), zr.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < z.cols; ++j) sum += std::exp(zr[j] - mx);
        const double lse = mx + std::log(sum);
        total += lse - zr[targets[k]];
        for (std::size_t j = 0; j < z.cols; ++j) probs(k, j) = std::exp(zr[j] - lse);
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    return make(Matrix::scalar(total * inv), {logits}, [rows, targets, probs = std::move(probs), inv](Node& self) {
        Node* in = grad_input(self, 0);
        if (!in) return;
        Matrix& g = in->grad_buffer();
        const double up = self.grad.data[0] * inv;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            for (std::size_t j = 0; j < g.cols; ++j) g(rows[k], j) += up * probs(k, j);
            g(rows[k], targets[k]) -= up;
        }
    });
}

Var bce_with_logits(const Var& logits, const Matrix& targets) {
    require_same_shape(logits.value(), targets, "bce_with_logits");
    const Matrix& x = logits.value();
    double total = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double v = x.data[i];
        total += std::max(v, 0.0) - v * targets.data[i] + std::log1p(std::exp(-std::fabs(v)));
    }
    const double inv = 1.0 / static_cast<double>(x.data.size());
    return make(Matrix::scalar(total * inv), {logits}, [targets, inv](Node& self) {
        Node* in = grad_input(self, 0);
        if (!in) return;
        Matrix& g = in->grad_buffer();
        const double up = self.grad.data[0] * inv;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double v = in->value.data[i];
            const double p = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
            g.data[i] += up * (p - targets.data[i]);
        }
    });
}

}  // namespace ag

}  // namespace ullava
