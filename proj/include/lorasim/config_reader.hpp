// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>

#include <json.hpp>

#include "lorasim/errors.hpp"

namespace lorasim::io {

/// Typed access to one JSON object. Every key read is remembered; finish()
/// rejects the rest, so typos in configs surface as errors naming the field.
class ConfigReader {
public:
    ConfigReader(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError((path_.empty() ? std::string("document") : path_) + ": expected an object");
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    const nlohmann::json& raw(const std::string& key) {
        seen_.insert(key);
        return obj_.at(key);
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError(field(key) + ": " + what);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_number()) fail(key, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(key, "expected a finite number");
        return d;
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
        }
        fail(key, "expected a non-negative integer");
    }

    std::uint32_t u32(const std::string& key, std::uint32_t fallback) {
        const std::uint64_t v = u64(key, fallback);
        if (v > std::numeric_limits<std::uint32_t>::max()) fail(key, "value too large");
        return static_cast<std::uint32_t>(v);
    }

    std::string str(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }

    /// Nested object; a missing key reads as an empty object.
    ConfigReader object(const std::string& key) {
        static const nlohmann::json kEmpty = nlohmann::json::object();
        if (!has(key)) return ConfigReader(kEmpty, field(key));
        const auto& v = raw(key);
        if (!v.is_object()) fail(key, "expected an object");
        return ConfigReader(v, field(key));
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.count(it.key())) fail(it.key(), "unknown key");
        }
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    nlohmann::json obj_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace lorasim::io
