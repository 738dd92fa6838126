#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "acp/errors.hpp"

namespace acp {

using Sha256Digest = std::array<unsigned char, crypto_hash_sha256_BYTES>;

inline Sha256Digest sha256_raw(std::string_view data) {
  Sha256Digest out{};
  crypto_hash_sha256(out.data(),
                     reinterpret_cast<const unsigned char*>(data.data()),
                     data.size());
  return out;
}

inline std::string to_hex(const unsigned char* bytes, std::size_t len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(kDigits[bytes[i] >> 4]);
    out.push_back(kDigits[bytes[i] & 0x0f]);
  }
  return out;
}

template <std::size_t N>
std::string to_hex(const std::array<unsigned char, N>& bytes) {
  return to_hex(bytes.data(), N);
}

inline bool is_lower_hex(std::string_view s) {
  for (char c : s) {
    const bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    if (!ok) return false;
  }
  return true;
}

// Strict: throws on odd length or non-lowercase-hex input.
inline std::string from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0 || !is_lower_hex(hex)) {
    throw ValidationError("malformed hex string");
  }
  auto nibble = [](char c) -> unsigned char {
    return c <= '9' ? static_cast<unsigned char>(c - '0')
                    : static_cast<unsigned char>(c - 'a' + 10);
  };
  std::string out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<char>((nibble(hex[i]) << 4) | nibble(hex[i + 1])));
  }
  return out;
}

// 64 lowercase hex chars.
inline std::string sha256_hex(std::string_view data) {
  return to_hex(sha256_raw(data));
}

}  // namespace acp
