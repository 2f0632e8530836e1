#include "bbmx/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace bbmx {

void DataTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) {
    throw std::invalid_argument("DataTable '" + name + "': row has " + std::to_string(row.size()) +
                                " entries, expected " + std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

bool DataTable::has_column(const std::string& col) const {
  return std::find(columns.begin(), columns.end(), col) != columns.end();
}

std::vector<double> DataTable::column(const std::string& col) const {
  const auto it = std::find(columns.begin(), columns.end(), col);
  if (it == columns.end()) throw std::invalid_argument("DataTable '" + name + "': no column " + col);
  const auto k = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[k]);
  return out;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_csv(const DataTable& table, const FileHeader& header, std::ostream& out) {
  out << "# tool=bbmx version=" << header.tool_version << " experiment=" << header.experiment
      << " config_hash=" << header.config_hash << " seed=" << header.seed << " table=" << table.name
      << '\n';
  for (std::size_t k = 0; k < table.columns.size(); ++k) {
    out << (k ? "," : "") << table.columns[k];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_number(row[k]);
    out << '\n';
  }
}

}  // namespace bbmx
