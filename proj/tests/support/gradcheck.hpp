// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Central-difference gradient checking for scalar functions of parameters.
// An entry passes when |analytic - numeric| <= rtol * max(|analytic|, |numeric|) + atol.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ullava/autograd.hpp"

namespace ullava::support {

struct GradCheckOptions {
    double rtol = 1e-4;
    double atol = 1e-8;
    double step = 1e-5;
    std::size_t max_entries_per_tensor = SIZE_MAX;  // seeded subset when smaller than the tensor
    std::uint64_t seed = 1;
};

struct GradCheckResult {
    std::size_t checked = 0;
    std::size_t failures = 0;
    double worst_ratio = 0.0;  // max |a - n| / (rtol * max(|a|,|n|) + atol); <= 1 passes
    std::string worst;

    bool ok() const { return checked > 0 && failures == 0; }
};

inline GradCheckResult grad_check(const std::function<ag::Var()>& f,
                                  const std::vector<std::pair<std::string, ag::Var>>& params,
                                  const GradCheckOptions& opt = {}) {
    for (auto [name, p] : params) p.zero_grad();
    ag::backward(f());
    std::vector<Matrix> analytic;
    for (const auto& [name, p] : params) analytic.push_back(p.grad());

    GradCheckResult res;
    std::mt19937_64 rng(opt.seed);
    ag::NoGradGuard guard;
    for (std::size_t k = 0; k < params.size(); ++k) {
        ag::Var p = params[k].second;
        const std::size_t n = p.value().size();
        std::vector<std::size_t> idx;
        if (n <= opt.max_entries_per_tensor) {
            for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        } else {
            for (std::size_t i = 0; i < opt.max_entries_per_tensor; ++i) idx.push_back(rng() % n);
        }
        for (std::size_t i : idx) {
            double& w = p.mutable_value().data[i];
            const double orig = w;
            w = orig + opt.step;
            const double up = f().item();
            w = orig - opt.step;
            const double down = f().item();
            w = orig;
            const double num = (up - down) / (2 * opt.step);
            const double ana = analytic[k].data[i];
            const double bound = opt.rtol * std::max(std::abs(ana), std::abs(num)) + opt.atol;
            const double ratio = std::abs(ana - num) / bound;
            ++res.checked;
            if (!(ratio <= 1.0)) ++res.failures;
            if (!(ratio <= res.worst_ratio)) {
                res.worst_ratio = ratio;
                res.worst = params[k].first + "[" + std::to_string(i) + "] analytic " + std::to_string(ana) +
                            " numeric " + std::to_string(num);
            }
        }
    }
    for (auto [name, p] : params) p.zero_grad();
    return res;
}

}  // namespace ullava::support
