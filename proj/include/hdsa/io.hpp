#pragma once

#include "hdsa/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hdsa {

/// 17 significant digits ("%.17g").
std::string format_number(double value);

/// CSV with a one-line header; `columns` holds one matrix column per header entry.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& columns);

/// Coordinates followed by value columns.
void write_field_csv(const std::filesystem::path& path, const std::vector<std::string>& coord_names,
                     const Matrix& coords, const std::vector<std::string>& value_names, const Matrix& values);

/// Reads a CSV written by write_csv; returns the header and the numeric body.
Matrix read_csv(const std::filesystem::path& path, std::vector<std::string>* header = nullptr);

std::uint64_t fnv1a(std::string_view text);
std::string hex64(std::uint64_t value);

}  // namespace hdsa
