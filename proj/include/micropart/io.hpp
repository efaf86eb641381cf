#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "micropart/partition.hpp"

namespace micropart::io {

// shortest round-trip decimal form (std::to_chars)
std::string format_double(double value);

// newline-delimited tokens in observation order
Partition read_partition(const std::filesystem::path& path);
void write_partition(const std::filesystem::path& path, const Partition& p);

void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace micropart::io
