#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "personaforge/domain.hpp"

namespace personaforge::io {

std::string read_file(const std::filesystem::path& path);
/// Writes atomically (temp file + rename) and creates parent directories.
void write_file(const std::filesystem::path& path, std::string_view content);

/// One JSON value per non-blank line. Parse errors carry the line number.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<Json>& rows);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::filesystem::path& path);

/// Fixed-precision decimal so reports are identical across platforms.
std::string format_real(double v, int precision = 6);

/// Minimal RFC 4180 writer.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void add_row(std::vector<std::string> cells);
    std::string str() const;
    std::size_t rows() const noexcept { return rows_.size(); }

private:
    static std::string escape(const std::string& cell);
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Splits a CSV document into rows of cells (handles quoted cells).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Plain-text list: one entry per line, blank lines and '#' comments skipped.
std::vector<std::string> read_word_list(const std::filesystem::path& path);

} // namespace personaforge::io
