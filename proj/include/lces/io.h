#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace lces {

std::string ReadFile(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written artifact.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view contents);

// Lowercase hex SHA-256 of `bytes`.
std::string Sha256Hex(std::string_view bytes);

// Shortest decimal representation that parses back to the same double.
std::string FormatDouble(double value);

}  // namespace lces
