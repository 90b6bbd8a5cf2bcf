// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/params.hpp"

#include <cmath>
#include <numbers>

#include "ullava/error.hpp"

namespace ullava {

ag::Var ParameterStore::add(const std::string& name, Matrix init) {
    if (index_.count(name)) throw Error(ErrorCode::Validation, "duplicate parameter " + name);
    index_[name] = entries_.size();
    entries_.emplace_back(name, ag::parameter(std::move(init)));
    return entries_.back().second;
}

const ag::Var& ParameterStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error(ErrorCode::IndexOutOfRange, "no parameter " + name);
    return entries_[it->second].second;
}

ag::Var& ParameterStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error(ErrorCode::IndexOutOfRange, "no parameter " + name);
    return entries_[it->second].second;
}

std::size_t ParameterStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : entries_) n += v.value().size();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& [name, v] : entries_) v.zero_grad();
}

bool in_scope(const std::string& name, const std::vector<std::string>& scopes) {
    for (const auto& s : scopes) {
        if (name == s) return true;
        if (name.size() > s.size() && name.compare(0, s.size(), s) == 0 && name[s.size()] == '.') return true;
    }
    return false;
}

// Box-Muller on the raw engine output; std::normal_distribution is
// implementation-defined and would make checkpoints differ across toolchains.
Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
    Matrix m(rows, cols);
    auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0); };
    for (std::size_t i = 0; i < m.data.size(); i += 2) {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        m.data[i] = stddev * r * std::cos(theta);
        if (i + 1 < m.data.size()) m.data[i + 1] = stddev * r * std::sin(theta);
    }
    return m;
}

}  // namespace ullava
