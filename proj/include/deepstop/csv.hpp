#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "deepstop/errors.hpp"

namespace deepstop {

inline std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// RFC-4180-quoted CSV with a header row. A single leading `#` provenance
/// line carries the version, config hash and seed; readers that object can
/// skip lines starting with '#'.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header,
            const std::string& provenance = "") {
    f_.open(path);
    if (!f_) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
    if (!provenance.empty()) f_ << "# " << provenance << "\n";
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) f_ << ',';
      f_ << csv_quote(fields[i]);
    }
    f_ << "\n";
  }

  static std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
  }

 private:
  std::ofstream f_;
};

}  // namespace deepstop
