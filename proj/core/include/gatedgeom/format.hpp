#pragma once

#include <string>

namespace gatedgeom {

// Locale-independent "%.10g" rendering used by every CSV writer.
std::string format_number(double value);

// Writes content to path through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace gatedgeom
