#pragma once

// Deterministic output: CSV files ('.' decimal, ',' separator, header row,
// LF endings) and the key = value summary with sorted keys. Floats are
// printed with 17 significant digits so identical runs produce identical
// bytes.

#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ticlq {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& filename, const std::vector<std::string>& header)
      : out_(filename, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open output file '" + filename + "'");
    write_strings(header);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    write_strings(cells);
  }

  void row(const std::vector<std::string>& cells) { write_strings(cells); }

 private:
  void write_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
};

/// key = value report with alphabetically sorted keys.
class Summary {
 public:
  void put(const std::string& key, const std::string& value) { entries_[key] = value; }
  void put(const std::string& key, double value) { entries_[key] = format_double(value); }
  void put(const std::string& key, int value) { entries_[key] = std::to_string(value); }
  void put(const std::string& key, long value) { entries_[key] = std::to_string(value); }
  void put(const std::string& key, bool value) { entries_[key] = value ? "true" : "false"; }

  std::string text() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
      out += k;
      out += " = ";
      out += v;
      out += '\n';
    }
    return out;
  }

  void write(const std::string& filename) const {
    std::ofstream out(filename, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file '" + filename + "'");
    out << text();
  }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace ticlq
