// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <pixkit/tool_protocol.hpp>

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace pixkit
{

/// One JSON value per non-blank line. Throws InvalidInput naming the line.
[[nodiscard]] std::vector<Json> read_jsonl(std::istream& in);
[[nodiscard]] std::vector<Json> read_jsonl_file(const std::filesystem::path& path);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over the target, so
/// readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace pixkit
