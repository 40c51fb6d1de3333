#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace toptrain::io {

std::string read_file(const std::filesystem::path& path);

// Writes through a sibling temp file and renames, so readers never observe a
// half-written artifact.
void write_file(const std::filesystem::path& path, std::string_view content);

// Calls `fn(line_number, value)` for every non-blank line. Line numbers are 1-based.
void for_each_json_line(const std::filesystem::path& path,
                        const std::function<void(std::size_t, const nlohmann::json&)>& fn);

// Compact, key-sorted serialization used for every artifact we hash.
std::string dump(const nlohmann::json& j);

}  // namespace toptrain::io
