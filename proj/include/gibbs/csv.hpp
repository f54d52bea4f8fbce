#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "gibbs/errors.hpp"

namespace gibbs {

/// Shortest round-trip representation; "inf" for +infinity.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

/// Minimal CSV emitter; fields are numbers or identifiers, so no quoting.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header)
      : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary);
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    bool first = true;
    for (auto h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << '\n';
  }

  template <class... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << field(fields), first = false), ...);
    out_ << '\n';
    if (!out_) throw IoError("write failed: " + path_.string());
  }

 private:
  static std::string field(double v) { return format_number(v); }
  static std::string field(float v) { return format_number(v); }
  static std::string field(const std::string& s) { return s; }
  static std::string field(const char* s) { return s; }
  template <class Int>
    requires std::is_integral_v<Int>
  static std::string field(Int v) {
    return std::to_string(v);
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace gibbs
