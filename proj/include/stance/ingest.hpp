#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "io.hpp"
#include "text.hpp"

// Adapters from raw delimited / JSON-lines downloads to the unified example schema.
namespace stance::ingest {

enum class Format { Csv, Tsv, Jsonl };

inline Format parse_format(std::string_view s) {
    if (s == "csv") return Format::Csv;
    if (s == "tsv") return Format::Tsv;
    if (s == "jsonl") return Format::Jsonl;
    throw InvalidArgument("unknown input format '" + std::string(s) + "' (expected csv, tsv or jsonl)");
}

inline Format format_from_extension(const std::filesystem::path& p) {
    const auto ext = text::to_lower(p.extension().string());
    if (ext == ".csv") return Format::Csv;
    if (ext == ".tsv" || ext == ".txt") return Format::Tsv;
    if (ext == ".jsonl" || ext == ".json") return Format::Jsonl;
    throw InvalidArgument("cannot infer the format of " + p.string() + "; pass --format");
}

using Row = std::map<std::string, std::string>;

/// RFC 4180 style records: quoted fields may hold delimiters, doubled quotes and newlines.
inline std::vector<std::vector<std::string>> parse_delimited(std::string_view data, char delimiter) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const char c = data[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < data.size() && data[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            quoted = true;
            any = true;
        } else if (c == delimiter) {
            record.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') {
                ++i;
            }
            if (any || !field.empty()) {
                record.push_back(std::move(field));
                records.push_back(std::move(record));
            }
            record.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) {
        throw SchemaViolation("unterminated quoted field");
    }
    if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

/// Rows keyed by column name (the header row for delimited input, object keys for JSON lines;
/// non-string JSON values are kept as their JSON text).
inline std::vector<Row> read_rows(const std::filesystem::path& path, Format format) {
    std::vector<Row> rows;
    if (format == Format::Jsonl) {
        io::for_each_jsonl(path, [&](const io::json& obj, std::size_t line) {
            if (!obj.is_object()) {
                throw SchemaViolation(path.string() + ":" + std::to_string(line) + ": expected a JSON object");
            }
            Row r;
            for (const auto& [k, v] : obj.items()) {
                r[k] = v.is_string() ? v.get<std::string>() : v.dump();
            }
            rows.push_back(std::move(r));
        });
        return rows;
    }
    const auto records = parse_delimited(io::read_text(path), format == Format::Csv ? ',' : '\t');
    if (records.empty()) {
        throw SchemaViolation(path.string() + ": no header row");
    }
    const auto& header = records.front();
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].size() != header.size()) {
            throw SchemaViolation(path.string() + ": record " + std::to_string(i + 1) + " has " +
                                  std::to_string(records[i].size()) + " fields, header has " +
                                  std::to_string(header.size()));
        }
        Row r;
        for (std::size_t c = 0; c < header.size(); ++c) {
            r[header[c]] = records[i][c];
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Column mapping. Several target/label columns (same count) expand each row into one example
/// per pair, e.g. two targets per tweet. An empty target column means an implicit target.
struct Mapping {
    std::optional<std::string> id_column;
    std::vector<std::string> target_columns;
    std::string context_column{"context"};
    std::vector<std::string> label_columns{"label"};
    /// Raw label -> inventory label; labels without an entry pass through unchanged.
    std::map<std::string, std::string> label_map;
    bool lowercase_labels{false};
    /// Rows whose mapped label is in this set are dropped (e.g. "NONE" placeholders).
    std::vector<std::string> skip_labels;
};

/// Parses "raw=mapped,raw2=mapped2".
inline std::map<std::string, std::string> parse_label_map(std::string_view spec) {
    std::map<std::string, std::string> out;
    std::size_t start = 0;
    while (start <= spec.size() && !spec.empty()) {
        const auto end = std::min(spec.find(',', start), spec.size());
        const auto item = spec.substr(start, end - start);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            throw InvalidArgument("label map entry '" + std::string(item) + "' is not raw=mapped");
        }
        out[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
        start = end + 1;
    }
    return out;
}

inline std::vector<StanceExample> convert(const std::vector<Row>& rows, const DatasetDescriptor& descriptor, Split split,
                                          const Mapping& mapping, const std::string& id_prefix = {}) {
    const auto pairs = std::max<std::size_t>(1, mapping.label_columns.size());
    if (mapping.label_columns.empty()) {
        throw InvalidArgument("at least one label column is required");
    }
    if (!mapping.target_columns.empty() && mapping.target_columns.size() != pairs) {
        throw InvalidArgument("target and label column lists differ in length");
    }
    auto field = [](const Row& r, const std::string& column, std::size_t row_no) -> const std::string& {
        const auto it = r.find(column);
        if (it == r.end()) {
            throw SchemaViolation("row " + std::to_string(row_no) + " has no column '" + column + "'");
        }
        return it->second;
    };
    std::vector<StanceExample> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string base = id_prefix + (mapping.id_column ? field(r, *mapping.id_column, i + 1)
                                                                : std::string(to_string(split)) + "-" + std::to_string(i));
        for (std::size_t k = 0; k < pairs; ++k) {
            StanceExample e;
            e.id = pairs == 1 ? base : base + "-" + std::to_string(k);
            e.dataset = descriptor.name;
            e.split = split;
            e.target = mapping.target_columns.empty() ? std::string{} : field(r, mapping.target_columns[k], i + 1);
            e.context = field(r, mapping.context_column, i + 1);
            std::string label = field(r, mapping.label_columns[k], i + 1);
            if (const auto it = mapping.label_map.find(label); it != mapping.label_map.end()) {
                label = it->second;
            }
            if (mapping.lowercase_labels) {
                label = text::to_lower(label);
            }
            if (std::find(mapping.skip_labels.begin(), mapping.skip_labels.end(), label) != mapping.skip_labels.end()) {
                continue;
            }
            e.label = std::move(label);
            validate_example(e, descriptor, "row " + std::to_string(i + 1));
            out.push_back(std::move(e));
        }
    }
    return out;
}

/// Replaces one split file of `<root>/<dataset>/`; ids must not collide with the other splits
/// already on disk.
inline void write_split(const std::filesystem::path& root, const DatasetDescriptor& descriptor, Split split,
                        const std::vector<StanceExample>& examples) {
    std::set<std::string> ids;
    for (const auto& e : examples) {
        if (!ids.insert(e.id).second) {
            throw SchemaViolation("duplicate id '" + e.id + "' in the converted " + std::string(to_string(split)) + " split");
        }
    }
    for (Split other : kAllSplits) {
        const auto path = split_path(root, descriptor.name, other);
        if (other == split || !std::filesystem::exists(path)) {
            continue;
        }
        io::for_each_jsonl(path, [&](const io::json& row, std::size_t) {
            const auto id = row.value("id", std::string{});
            if (ids.contains(id)) {
                throw SchemaViolation("id '" + id + "' already exists in " + path.string());
            }
        });
    }
    std::vector<io::json> rows;
    rows.reserve(examples.size());
    for (const auto& e : examples) {
        rows.push_back(to_json(e));
    }
    io::write_jsonl_atomic(split_path(root, descriptor.name, split), rows);
}

}  // namespace stance::ingest
