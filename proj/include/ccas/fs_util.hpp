#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ccas {

/// Whole-file read. Throws Error(Data) when the file cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

/// Write via temp file + rename so readers never observe partial artifacts.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace ccas
