#ifndef PLATFORM_EGT_CSV_HPP
#define PLATFORM_EGT_CSV_HPP

#include <charconv>
#include <cstddef>
#include <initializer_list>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace platform_egt::csv {

// Shortest form is not used on purpose: 17 significant digits is the fixed,
// round-trip-exact format of every table.
inline std::string format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string format(int v) { return std::to_string(v); }
inline std::string format(long v) { return std::to_string(v); }
inline std::string format(unsigned long v) { return std::to_string(v); }
inline std::string format(bool v) { return v ? "1" : "0"; }
inline std::string format(std::string_view v) { return std::string(v); }
inline std::string format(const char* v) { return std::string(v); }
inline std::string format(const std::string& v) { return v; }

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  template <typename... Ts>
  void row(const Ts&... values) {
    static_assert(sizeof...(Ts) > 0);
    std::vector<std::string> r;
    (r.push_back(format(values)), ...);
    add(std::move(r));
  }

  void add(std::vector<std::string> r) {
    if (r.size() != header_.size()) throw std::logic_error("csv row width does not match header");
    rows_.push_back(std::move(r));
  }

  std::size_t size() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }

  void write(std::ostream& out) const {
    write_line(out, header_);
    for (const auto& r : rows_) write_line(out, r);
  }

 private:
  static void write_line(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << escape(fields[i]);
    }
    out << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace platform_egt::csv

#endif  // PLATFORM_EGT_CSV_HPP
