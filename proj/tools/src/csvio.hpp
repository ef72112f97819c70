#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace matmuon::cli {

// Shortest round-trip decimal text, locale-independent (std::to_chars).
// Infinities print as "inf"/"-inf".
std::string format_double(double v);

// Builds one CSV row from pre-formatted cells.
std::string csv_row(const std::vector<std::string>& cells);

// Writes via a temp file in the same directory, then renames into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

} // namespace matmuon::cli
