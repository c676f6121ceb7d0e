#pragma once

#include <array>
#include <charconv>
#include <string>

namespace geobridge::detail {

/// Shortest round-trip decimal text for a double.
inline std::string shortest(double v) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

}  // namespace geobridge::detail
