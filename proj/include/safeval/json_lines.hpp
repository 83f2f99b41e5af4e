#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace safeval {

struct JsonLine {
    std::size_t line;  // 1-based
    nlohmann::json value;
};

// Reads a JSON-lines file. Blank lines are skipped; a malformed line raises
// ParseError carrying the 1-based line number.
std::vector<JsonLine> read_json_lines(const std::filesystem::path& path);

// Parses one line, reporting `line` on failure.
nlohmann::json parse_json_line(const std::string& text, const std::filesystem::path& path,
                               std::size_t line);

// Writes `content` through a temp file in the same directory, then renames.
// A crashed run never leaves a half-written file at `path`.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace safeval
