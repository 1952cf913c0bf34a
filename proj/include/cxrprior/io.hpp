#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cxrprior {

// Writes to a temporary sibling file and renames it over `path`.
// Throws std::runtime_error when the target directory is not writable.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

// 17 significant digits, enough to round-trip any double.
std::string format_double(double value);

}  // namespace cxrprior
