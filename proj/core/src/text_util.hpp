#pragma once

// Internal text helpers shared by the CSV/JSON writers.

#include <charconv>
#include <string>

namespace prbcast::detail {

/// Shortest decimal representation that restores the exact double, so CSV
/// artifacts round-trip losslessly.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace prbcast::detail
