#include "hdsa/io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hdsa {

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& columns) {
  require(static_cast<Index>(header.size()) == columns.cols(), "write_csv: header does not match the column count");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
  os << '\n';
  for (Index i = 0; i < columns.rows(); ++i) {
    for (Index j = 0; j < columns.cols(); ++j) os << (j ? "," : "") << format_number(columns(i, j));
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_field_csv(const std::filesystem::path& path, const std::vector<std::string>& coord_names,
                     const Matrix& coords, const std::vector<std::string>& value_names, const Matrix& values) {
  require(coords.rows() == values.rows(), "write_field_csv: coordinate and value rows differ");
  Matrix all(coords.rows(), coords.cols() + values.cols());
  all << coords, values;
  std::vector<std::string> header = coord_names;
  header.insert(header.end(), value_names.begin(), value_names.end());
  write_csv(path, header, all);
}

Matrix read_csv(const std::filesystem::path& path, std::vector<std::string>* header) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    require(row.size() == names.size(), "read_csv: ragged row in " + path.string());
    rows.push_back(std::move(row));
  }
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  if (header) *header = std::move(names);
  return out;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

}  // namespace hdsa
