#pragma once

// Minimal CSV reading/writing. All emitted files are UTF-8 with LF line
// endings; doubles are printed with round-trip precision so identical runs
// produce byte-identical files.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace codedcache {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    out_ << header << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << "\n";
  }

  static std::string cell(double v) { return format_double(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(const std::string& s) { return s; }

 private:
  std::ofstream out_;
};

struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // line number (1-based, including header) of each row, for error reporting
  std::vector<long> line_numbers;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline CsvFile read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  CsvFile f;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto cells = split_csv_line(line);
    if (lineno == 1) {
      f.header = cells;
    } else {
      f.rows.push_back(cells);
      f.line_numbers.push_back(lineno);
    }
  }
  if (f.header.empty()) throw std::runtime_error(path + ": missing header row");
  return f;
}

inline long parse_count(const std::string& s, const std::string& path, long lineno,
                        const char* what) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad " + what + " '" + s + "'");
  }
  if (pos != s.size())
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad " + what + " '" + s + "'");
  return v;
}

}  // namespace codedcache
