#pragma once

#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>

namespace grl {

/// Shortest decimal form that round-trips to the same double. Keeps every
/// exported file byte-stable across re-exports.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

/// Minimal row writer: caller supplies the header once, cells per row.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(const std::string& line) { out_ << line << '\n'; }

  CsvWriter& cell(const std::string& v) {
    sep();
    out_ << v;
    return *this;
  }
  CsvWriter& cell(double v) { return cell(format_double(v)); }
  CsvWriter& cell(std::int64_t v) { return cell(std::to_string(v)); }
  CsvWriter& cell(int v) { return cell(std::to_string(v)); }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }

  std::ostream& out_;
  bool first_ = true;
};

}  // namespace grl
