#include "hoimotion/common.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>

namespace hoimo {

std::string format_double(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string to_hex(std::uint64_t value) {
  static const char digits[] = "0123456789abcdef";
  std::array<char, 16> buf;
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[value & 0xf];
    value >>= 4;
  }
  return std::string(buf.data(), 16);
}

}  // namespace hoimo
