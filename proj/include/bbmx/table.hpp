#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bbmx {

// Column-named numeric table, the unit of every CSV data file.
struct DataTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> row);
  std::vector<double> column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

struct FileHeader {
  std::string tool_version;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string experiment;
};

// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite.
std::string format_number(double x);

// "# key=value ..." comment line, a header row, then one line per row, LF only.
void write_csv(const DataTable& table, const FileHeader& header, std::ostream& out);

}  // namespace bbmx
