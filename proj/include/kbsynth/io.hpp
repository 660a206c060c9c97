// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace kbsynth {

/// Shortest round-trip text for a double ("%.17g" trimmed when a shorter form is exact).
std::string format_double(double value);

std::string csv_field(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

}  // namespace kbsynth
