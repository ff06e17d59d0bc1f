#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace stance::io {

using json = nlohmann::json;

/// Writes through a sibling temporary file and renames it over `path`, so readers never see a
/// partially written report.
inline void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open for writing: " + tmp.string());
        }
        writer(out);
        out.flush();
        if (!out) {
            throw Error("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    write_atomic(path, [&](std::ostream& out) { out << text; });
}

inline void write_json_atomic(const std::filesystem::path& path, const json& doc) {
    write_atomic(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

inline void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<json>& rows) {
    write_atomic(path, [&](std::ostream& out) {
        for (const auto& row : rows) {
            out << row.dump() << '\n';
        }
    });
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw SchemaViolation(path.string() + ": " + e.what());
    }
}

/// Parses a JSON-lines file; blank lines are skipped. The callback receives the 1-based line
/// number for diagnostics.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(const json&, std::size_t)>& visit) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open: " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        json row;
        try {
            row = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaViolation(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        visit(row, line_no);
    }
}

}  // namespace stance::io
