#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

namespace delayflow::csv {

// Every numeric CSV field is written with 15 significant digits.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

// Writes comma-separated fields followed by '\n'.
class RowWriter {
 public:
  explicit RowWriter(std::ostream& os) : os_(os) {}

  template <class... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((put(fields, first)), ...);
    os_ << '\n';
  }

 private:
  void sep(bool& first) {
    if (!first) os_ << ',';
    first = false;
  }
  void put(double v, bool& first) { sep(first); os_ << num(v); }
  void put(std::string_view s, bool& first) { sep(first); os_ << s; }
  void put(const char* s, bool& first) { sep(first); os_ << s; }
  void put(const std::string& s, bool& first) { sep(first); os_ << s; }
  template <class I>
    requires std::is_integral_v<I>
  void put(I v, bool& first) {
    sep(first);
    os_ << v;
  }

  std::ostream& os_;
};

}  // namespace delayflow::csv
