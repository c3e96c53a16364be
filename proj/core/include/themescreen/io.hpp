#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace themescreen {

// Whole file as bytes. Throws Error if it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over path. Creates parent dirs.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace themescreen
