#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gsched {

// Whole-file read; throws DataError when unreadable.
std::string read_file(const std::string& path);

// Write via temp file + rename so readers never observe partial output.
void atomic_write_file(const std::string& path, const std::string& content);

// Simple comma split, fields trimmed; the trace formats here never quote.
std::vector<std::string> split_csv_line(const std::string& line);

std::string format_double(double v);  // shortest round-trip text

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string hex64(std::uint64_t v);

}  // namespace gsched
