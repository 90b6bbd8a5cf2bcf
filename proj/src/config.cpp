// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ullava/error.hpp"

namespace ullava {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

bool split_assignment(const std::string& line, std::string& key, std::string& value) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) return false;
    key = trim(line.substr(0, eq));
    value = trim(line.substr(eq + 1));
    return !key.empty() && key.find_first_of(" \t") == std::string::npos;
}

Error bad_value(const std::string& key, const std::string& value, const char* type) {
    return Error(ErrorCode::Validation, "config key '" + key + "': '" + value + "' is not " + type);
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        std::string key, value;
        if (!split_assignment(line, key, value)) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(n) + ": expected key = value");
        }
        c.values_[key] = value;
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse(ss.str());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void Config::apply_override(const std::string& assignment) {
    std::string key, value;
    if (!split_assignment(assignment, key, value)) {
        throw Error(ErrorCode::Validation, "override '" + assignment + "' is not key=value");
    }
    values_[key] = value;
}

std::optional<std::string> Config::find(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    const auto v = find(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) throw bad_value(key, *v, "an integer");
    return out;
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
    const auto v = get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw bad_value(key, std::to_string(v), "a non-negative integer");
    return static_cast<std::size_t>(v);
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto v = find(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        const double out = std::stod(*v, &used);
        if (used != v->size()) throw bad_value(key, *v, "a number");
        return out;
    } catch (const std::logic_error&) {
        throw bad_value(key, *v, "a number");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw bad_value(key, *v, "a boolean");
}

std::vector<std::string> Config::get_list(const std::string& key, const std::vector<std::string>& fallback) const {
    const auto v = find(key);
    if (!v) return fallback;
    std::vector<std::string> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::string Config::hash() const {
    const std::string s = serialize();
    return hex64(fnv1a(s.data(), s.size()));
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace ullava
