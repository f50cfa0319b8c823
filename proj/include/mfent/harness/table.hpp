#pragma once

// Column tables and their CSV form: comma separated, header row, '.' decimal,
// doubles printed with 12 significant digits so identical runs give identical bytes.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "mfent/core.hpp"

namespace mfent::harness {

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns.size())
      throw Error("table '" + name + "': row has " + std::to_string(row.size()) + " cells for " +
                  std::to_string(columns.size()) + " columns");
    rows.push_back(std::move(row));
  }

  int index(const std::string& col) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == col) return static_cast<int>(i);
    throw Error("table '" + name + "' has no column '" + col + "'");
  }

  double number(std::size_t row, const std::string& col) const {
    const Cell& c = rows.at(row).at(index(col));
    if (const double* d = std::get_if<double>(&c)) return *d;
    if (const long long* i = std::get_if<long long>(&c)) return static_cast<double>(*i);
    throw Error("table '" + name + "': column '" + col + "' is not numeric");
  }

  std::string text(std::size_t row, const std::string& col) const {
    const Cell& c = rows.at(row).at(index(col));
    if (const std::string* s = std::get_if<std::string>(&c)) return *s;
    throw Error("table '" + name + "': column '" + col + "' is not text");
  }

  std::vector<double> column(const std::string& col) const {
    std::vector<double> out;
    for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(number(r, col));
    return out;
  }
};

inline std::string format_cell(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) {
    if (std::isnan(*d)) return "nan";
    if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", *d == 0.0 ? 0.0 : *d);
    return buf;
  }
  if (const long long* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

inline void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
    os << '\n';
  }
}

inline void write_csv(const std::string& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_csv(out, t);
}

}  // namespace mfent::harness
