#pragma once

#include <filesystem>

#include "ztnc/bytes.hpp"

namespace ztnc {

// Throws InvalidInputError if the file cannot be opened.
Bytes read_file(const std::filesystem::path& path);

// Writes through a temporary sibling and renames, so a failed write never
// leaves a partial file at `path`.
void write_file(const std::filesystem::path& path, ByteView data);

}  // namespace ztnc
