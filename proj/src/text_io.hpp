#pragma once

// Helpers shared by the versioned text formats (checkpoints, fixtures,
// normalizers). Doubles are written in shortest round-trip form.

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <system_error>

#include "uinject/error.hpp"

namespace uinject::detail {

inline std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw_format("cannot format floating-point value");
  return std::string(buffer, end);
}

class TokenReader {
 public:
  TokenReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  std::string next() {
    std::string token;
    if (!(in_ >> token)) throw_format(what_ + ": unexpected end of file");
    return token;
  }

  void expect(const std::string& keyword) {
    const std::string token = next();
    if (token != keyword) {
      throw_format(what_ + ": expected '" + keyword + "', found '" + token + "'");
    }
  }

  double next_double() {
    const std::string token = next();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw_format(what_ + ": malformed number '" + token + "'");
    }
    return value;
  }

  std::int64_t next_int() {
    const std::string token = next();
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw_format(what_ + ": malformed integer '" + token + "'");
    }
    return value;
  }

  const std::string& what() const { return what_; }

 private:
  std::istream& in_;
  std::string what_;
};

}  // namespace uinject::detail
