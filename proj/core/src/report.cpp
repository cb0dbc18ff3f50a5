// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/report.hpp"

#include <charconv>
#include <cmath>

#include "smoothsal/errors.hpp"
#include "smoothsal/tensor_io.hpp"

#ifndef SMOOTHSAL_GIT_DESCRIBE
#define SMOOTHSAL_GIT_DESCRIBE "unknown"
#endif

namespace smoothsal {

std::string_view git_describe() { return SMOOTHSAL_GIT_DESCRIBE; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    throw UsageError("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                     std::to_string(header_.size()));
  }
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  auto line = [](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      const bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
      if (!quote) {
        out += cells[i];
        continue;
      }
      out += '"';
      for (char ch : cells[i]) {
        if (ch == '"') out += '"';
        out += ch;
      }
      out += '"';
    }
    return out + "\n";
  };
  std::string out = line(header_);
  for (const auto& r : rows_) out += line(r);
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_file_bytes(path, str()); }

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file_bytes(path, j.dump(2) + "\n");
}

}  // namespace smoothsal
