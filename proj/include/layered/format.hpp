#pragma once

// Small text-output helpers shared by the report writers and the CLI.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>

namespace layered {

inline constexpr std::string_view kToolName = "layered-rom";
inline constexpr std::string_view kToolVersion = "1.0.0";

/// Shortest decimal text with 17 significant digits, '.' separator, locale-free.
inline std::string format_real(double value) {
  char buffer[64];
  auto result = std::to_chars(buffer, buffer + sizeof(buffer), value,
                              std::chars_format::general, 17);
  if (result.ec != std::errc{}) return "nan";
  return std::string(buffer, result.ptr);
}

/// 64-bit FNV-1a, used to fingerprint configurations in output headers.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

inline std::string hex64(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k) {
    out[static_cast<std::size_t>(k)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

/// Comment line carried at the top of every file the tool writes.
inline std::string provenance_line(std::string_view config_text) {
  std::string line = "# ";
  line += kToolName;
  line += ' ';
  line += kToolVersion;
  line += " config=";
  line += hex64(fnv1a(config_text));
  return line;
}

}  // namespace layered
