// Copyright (C) 2026 lorasim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lorasim::io {

/// Writes `contents` to a sibling temp file and renames it over `path`, so
/// readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string_view trim(std::string_view s);

/// Whole-field parses; std::nullopt on trailing garbage, overflow or empty input.
std::optional<double> parse_double(std::string_view s);
std::optional<std::uint64_t> parse_u64(std::string_view s);

}  // namespace lorasim::io
