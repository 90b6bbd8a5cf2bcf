// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ullava/autograd.hpp"

namespace ullava {

/// Named trainable tensors. Names are dotted paths; the first component is the
/// namespace ("lm", "visual_projector", "pixel_head", "region_head") used by
/// freezing scopes and checkpoints.
class ParameterStore {
public:
    ag::Var add(const std::string& name, Matrix init);
    const ag::Var& get(const std::string& name) const;
    ag::Var& get(const std::string& name);
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    /// Parameters in registration order.
    const std::vector<std::pair<std::string, ag::Var>>& entries() const { return entries_; }
    std::vector<std::pair<std::string, ag::Var>>& entries() { return entries_; }

    std::size_t parameter_count() const;
    void zero_grad();

private:
    std::vector<std::pair<std::string, ag::Var>> entries_;
    std::map<std::string, std::size_t> index_;
};

/// True if `name` lies in any scope: equal to it or prefixed by "scope.".
bool in_scope(const std::string& name, const std::vector<std::string>& scopes);

/// Normal(0, stddev) matrix from a seeded engine.
Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);

}  // namespace ullava
