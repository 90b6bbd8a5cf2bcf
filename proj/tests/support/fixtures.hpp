// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "ullava/types.hpp"

namespace ullava::support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("ullava-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline BinaryMask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double p = 0.5) {
    BinaryMask m(h, w);
    std::bernoulli_distribution coin(p);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) m.set(r, c, coin(rng));
    return m;
}

inline NormalizedBox random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    if (a > b) std::swap(a, b);
    if (c > d) std::swap(c, d);
    if (b - a < 1e-3) b = std::min(1.0, a + 0.01), a = b - 0.01;
    if (d - c < 1e-3) d = std::min(1.0, c + 0.01), c = d - 0.01;
    return {a, c, b, d};
}

}  // namespace ullava::support
