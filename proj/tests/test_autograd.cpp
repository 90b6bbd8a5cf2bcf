// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "support/gradcheck.hpp"
#include "ullava/error.hpp"
#include "ullava/params.hpp"

using namespace ullava;
using ullava::support::grad_check;

namespace {

ag::Var rand_param(std::size_t r, std::size_t c, std::uint64_t seed, double std = 1.0) {
    std::mt19937_64 rng(seed);
    return ag::parameter(random_normal(r, c, std, rng));
}

void expect_grads(const std::function<ag::Var()>& f, std::vector<std::pair<std::string, ag::Var>> ps) {
    const auto res = grad_check(f, ps);
    EXPECT_TRUE(res.ok()) << res.worst;
}

}  // namespace

TEST(Matrix, MatmulAndTranspose) {
    Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
    Matrix b(3, 2, {7, 8, 9, 10, 11, 12});
    const Matrix c = matmul(a, b);
    EXPECT_EQ(c, Matrix(2, 2, {58, 64, 139, 154}));
    EXPECT_EQ(transpose(a), Matrix(3, 2, {1, 4, 2, 5, 3, 6}));
    EXPECT_THROW(matmul(a, a), Error);
    EXPECT_THROW(Matrix(2, 2, std::vector<double>{1.0}), Error);
}

TEST(Autograd, ElementwiseOps) {
    auto a = rand_param(3, 4, 1), b = rand_param(3, 4, 2);
    expect_grads([&] { return ag::sum(ag::mul(ag::add(a, b), ag::sub(a, b))); }, {{"a", a}, {"b", b}});
    auto pos = ag::parameter(Matrix(2, 2, {1.5, 2.0, 0.7, 3.1}));
    expect_grads([&] { return ag::sum(ag::div(a, ag::add_scalar(ag::abs(b), 0.5))); }, {{"a", a}, {"b", b}});
    expect_grads([&] { return ag::mean(ag::scale(ag::mul(pos, pos), 0.3)); }, {{"pos", pos}});
    expect_grads([&] { return ag::sum(ag::minimum(a, b)); }, {{"a", a}, {"b", b}});
    expect_grads([&] { return ag::sum(ag::maximum(a, b)); }, {{"a", a}, {"b", b}});
}

TEST(Autograd, Activations) {
    auto a = rand_param(4, 5, 3);
    expect_grads([&] { return ag::sum(ag::gelu(a)); }, {{"a", a}});
    expect_grads([&] { return ag::sum(ag::sigmoid(a)); }, {{"a", a}});
    expect_grads([&] { return ag::sum(ag::mul(ag::relu(a), a)); }, {{"a", a}});
}

TEST(Autograd, LinearAlgebraAndShapes) {
    auto a = rand_param(3, 4, 4), b = rand_param(4, 2, 5), row = rand_param(1, 2, 6);
    expect_grads([&] { return ag::sum(ag::gelu(ag::add_row(ag::matmul(a, b), row))); },
                 {{"a", a}, {"b", b}, {"row", row}});
    expect_grads([&] { return ag::sum(ag::mul(ag::transpose(a), ag::transpose(a))); }, {{"a", a}});
    expect_grads([&] { return ag::sum(ag::mean_rows(ag::gelu(a))); }, {{"a", a}});
    expect_grads(
        [&] {
            auto s = ag::slice_cols(a, 1, 2);
            auto c = ag::concat_cols({s, a});
            auto r = ag::concat_rows({c, c});
            return ag::sum(ag::gelu(ag::gather_rows(r, {0, 3, 3, 5})));
        },
        {{"a", a}});
    auto base = rand_param(5, 4, 7);
    expect_grads([&] { return ag::sum(ag::gelu(ag::scatter_rows(base, {1, 3, 4}, a))); }, {{"base", base}, {"a", a}});
    expect_grads([&] { return ag::sum(ag::gelu(ag::gather_flat(a, {0, 5, 5, 11, 2, 7}, 2, 3))); }, {{"a", a}});
}

TEST(Autograd, FusedOps) {
    auto x = rand_param(4, 6, 8), g = rand_param(1, 6, 9), b = rand_param(1, 6, 10);
    expect_grads([&] { return ag::sum(ag::gelu(ag::layer_norm(x, g, b))); }, {{"x", x}, {"g", g}, {"b", b}});
    auto s = rand_param(4, 4, 11);
    auto w = rand_param(4, 4, 12);
    expect_grads([&] { return ag::sum(ag::mul(ag::causal_softmax(s), w)); }, {{"s", s}});
    auto logits = rand_param(5, 7, 13);
    expect_grads([&] { return ag::cross_entropy(logits, {0, 2, 4}, {1, 6, 3}); }, {{"logits", logits}});
    Matrix targets(5, 7);
    for (std::size_t i = 0; i < targets.size(); i += 3) targets.data[i] = 1.0;
    expect_grads([&] { return ag::bce_with_logits(logits, targets); }, {{"logits", logits}});
}

TEST(Autograd, CausalSoftmaxMasksFuture) {
    const auto p = ag::causal_softmax(ag::constant(Matrix(3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9}))).value();
    EXPECT_EQ(p(0, 1), 0.0);
    EXPECT_EQ(p(0, 2), 0.0);
    EXPECT_EQ(p(1, 2), 0.0);
    EXPECT_DOUBLE_EQ(p(0, 0), 1.0);
    EXPECT_NEAR(p(2, 0) + p(2, 1) + p(2, 2), 1.0, 1e-15);
}

TEST(Autograd, NoGradGuardSkipsGraph) {
    auto a = rand_param(2, 2, 14);
    {
        ag::NoGradGuard guard;
        EXPECT_FALSE(ag::grad_enabled());
        EXPECT_FALSE(ag::sum(ag::mul(a, a)).requires_grad());
    }
    EXPECT_TRUE(ag::grad_enabled());
    EXPECT_TRUE(ag::sum(ag::mul(a, a)).requires_grad());
}

TEST(Autograd, BackwardNeedsScalar) {
    auto a = rand_param(2, 2, 15);
    EXPECT_THROW(ag::backward(a), Error);
}

TEST(Autograd, GradientsAccumulateAcrossBackwardCalls) {
    auto a = ag::parameter(Matrix(1, 1, {3.0}));
    ag::backward(ag::mul(a, a));
    ag::backward(ag::mul(a, a));
    EXPECT_DOUBLE_EQ(a.grad()(0, 0), 12.0);
    a.zero_grad();
    ag::backward(ag::scale(a, 2.0));
    EXPECT_DOUBLE_EQ(a.grad()(0, 0), 2.0);
}

TEST(Params, StoreAndScopes) {
    ParameterStore store;
    store.add("lm.layers.0.wq", Matrix(2, 2));
    store.add("visual_projector.weight", Matrix(3, 1));
    EXPECT_EQ(store.parameter_count(), 7u);
    EXPECT_EQ(store.entries().front().first, "lm.layers.0.wq");
    EXPECT_THROW(store.add("lm.layers.0.wq", Matrix(1, 1)), Error);
    EXPECT_TRUE(in_scope("lm.layers.0.wq", {"lm"}));
    EXPECT_FALSE(in_scope("lmx.w", {"lm"}));
    EXPECT_TRUE(in_scope("visual_projector.weight", {"lm", "visual_projector"}));
    EXPECT_FALSE(in_scope("pixel_head.decoder.w", {}));
}

TEST(Params, RandomNormalIsSeeded) {
    std::mt19937_64 a(5), b(5);
    EXPECT_EQ(random_normal(4, 4, 1.0, a), random_normal(4, 4, 1.0, b));
}
