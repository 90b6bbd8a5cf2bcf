// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Flat run configuration: one `key = value` per line, `#` starts a comment.
// Keys are dotted (e.g. `model.d_lm`, `stage2.max_steps`).

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ullava {

class Config {
public:
    /// Throws ParseError naming the line for malformed entries.
    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);

    /// Applies a `key=value` override. Throws Validation when malformed.
    void apply_override(const std::string& assignment);
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> find(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    /// Typed getters throw Validation when the stored text does not parse.
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }
    /// Sorted `key = value` lines.
    std::string serialize() const;
    /// FNV-1a of serialize(), as 16 hex digits.
    std::string hash() const;

private:
    std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace ullava
