#pragma once

#include <string>

namespace rydbohm::io {

// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

// Strict parsers: the whole string must be consumed. Throw InvalidInput.
double parse_number(const std::string& text, const std::string& what);
long long parse_integer(const std::string& text, const std::string& what);

// Hex SHA-256 digest of a byte string or of a file's contents.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

} // namespace rydbohm::io
