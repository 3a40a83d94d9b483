// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lorasim {

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(format(source, line, what)), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    static std::string format(const std::string& source, std::size_t line, const std::string& what) {
        if (line == 0) return source + ": " + what;
        return source + ":" + std::to_string(line) + ": " + what;
    }

    std::size_t line_;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing or inconsistent configuration (calibration entries, scenario fields).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A calibrated latency function was probed outside its domain.
class CalibrationDomainError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

}  // namespace lorasim
