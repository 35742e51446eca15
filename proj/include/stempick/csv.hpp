#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stempick/core.hpp"

namespace stempick {

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// shortest round-trip decimal formatting so reruns are byte-identical
inline std::string format_double(double v) {
  char buf[40];
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : os_(path), ncols_(columns.size()) {
    if (!os_) throw CsvError("cannot open for writing: " + path);
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) os_ << ',';
      os_ << columns[i];
    }
    os_ << '\n';
  }

  void row(const std::vector<double>& values) {
    if (values.size() != ncols_) throw CsvError("row width does not match header");
    for (size_t i = 0; i < values.size(); ++i) {
      if (i) os_ << ',';
      os_ << format_double(values[i]);
    }
    os_ << '\n';
  }

  void flush() { os_.flush(); }

 private:
  std::ofstream os_;
  size_t ncols_;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw CsvError("missing column: " + name);
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CsvError("cannot open: " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(is, line) || line.empty())
    throw CsvError("empty file, no header: " + path);
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
  }
  size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw CsvError(path + ":" + std::to_string(lineno) + ": not a number: " + cell);
      row.push_back(v);
    }
    if (row.size() != t.columns.size())
      throw CsvError(path + ":" + std::to_string(lineno) + ": ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace stempick
