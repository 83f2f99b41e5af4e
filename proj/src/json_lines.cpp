#include "safeval/json_lines.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "safeval/errors.hpp"

namespace safeval {

nlohmann::json parse_json_line(const std::string& text, const std::filesystem::path& path,
                               std::size_t line) {
    nlohmann::json parsed = nlohmann::json::parse(text, nullptr, false);
    if (parsed.is_discarded()) {
        throw ParseError(path.string(), line, "malformed JSON record");
    }
    return parsed;
}

std::vector<JsonLine> read_json_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open file: " + path.string());
    }
    std::vector<JsonLine> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        records.push_back({line_no, parse_json_line(line, path, line_no)});
    }
    return records;
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path dir = path.parent_path();
    if (!dir.empty()) {
        std::filesystem::create_directories(dir);
    }
    // Unique temp name: concurrent writers of the same target (e.g. two
    // workers building one shared bank) must not clobber each other's
    // in-progress file. The rename stays atomic either way.
    static std::atomic<unsigned> counter{0};
    std::filesystem::path tmp = path;
    tmp += ".tmp" + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw InputError("cannot open file for writing: " + tmp.string());
        }
        out << content;
        out.flush();
        if (!out) {
            throw InputError("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace safeval
