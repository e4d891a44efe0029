// Copyright 2026 The picekit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "picekit/errors.hpp"

namespace picekit {

/// 17 significant digits: enough for a lossless double round trip, so
/// regression tests can compare emitted files byte for byte.
inline std::string format_number(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

/// Line-oriented CSV emitter: '.' decimal point, LF line endings, no quoting.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError("csv: cannot open '" + path + "' for writing");
  }

  void header(const std::vector<std::string>& names) {
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (k > 0) out_ << ',';
      out_ << names[k];
    }
    out_ << '\n';
  }

  CsvWriter& field(std::int64_t value) {
    sep();
    out_ << value;
    return *this;
  }

  CsvWriter& field(double value) {
    sep();
    out_ << format_number(value);
    return *this;
  }

  void end_row() {
    out_ << '\n';
    row_started_ = false;
  }

 private:
  void sep() {
    if (row_started_) out_ << ',';
    row_started_ = true;
  }

  std::ofstream out_;
  bool row_started_ = false;
};

/// Reads (time, value) rows; a non-numeric first line is treated as a header.
inline std::vector<std::pair<double, double>> read_time_value_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("csv: cannot open '" + path + "'");
  std::vector<std::pair<double, double>> rows;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b)) {
      throw ConfigError("csv: '" + path + "' line " + std::to_string(line_no) +
                        ": expected two comma-separated fields");
    }
    try {
      rows.emplace_back(std::stod(a), std::stod(b));
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header row
      throw ConfigError("csv: '" + path + "' line " + std::to_string(line_no) +
                        ": expected numeric time,value");
    }
  }
  return rows;
}

}  // namespace picekit
