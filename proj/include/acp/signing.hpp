#pragma once

#include <sodium.h>

#include <array>
#include <mutex>
#include <string>
#include <string_view>

#include "acp/errors.hpp"
#include "acp/hash.hpp"

namespace acp {

namespace detail {
inline void ensure_sodium_init() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
  });
}
}  // namespace detail

// Ed25519 public key, 32 bytes.
struct VerifyKey {
  std::array<unsigned char, crypto_sign_PUBLICKEYBYTES> bytes{};

  std::string hex() const { return to_hex(bytes); }

  static VerifyKey from_hex(std::string_view hex) {
    const std::string raw = acp::from_hex(hex);
    if (raw.size() != crypto_sign_PUBLICKEYBYTES) {
      throw ValidationError("verify key must be 32 bytes");
    }
    VerifyKey key;
    std::copy(raw.begin(), raw.end(), reinterpret_cast<char*>(key.bytes.data()));
    return key;
  }
};

// Ed25519 private key material, held as the 32-byte seed.
class SigningKey {
 public:
  static SigningKey generate() {
    detail::ensure_sodium_init();
    SigningKey key;
    randombytes_buf(key.seed_.data(), key.seed_.size());
    key.expand();
    return key;
  }

  static SigningKey from_seed(const std::array<unsigned char, crypto_sign_SEEDBYTES>& seed) {
    detail::ensure_sodium_init();
    SigningKey key;
    key.seed_ = seed;
    key.expand();
    return key;
  }

  VerifyKey verify_key() const {
    VerifyKey out;
    out.bytes = public_;
    return out;
  }

  // Detached 64-byte Ed25519 signature over `message`, base64url, no padding.
  std::string sign_b64url(std::string_view message) const {
    std::array<unsigned char, crypto_sign_BYTES> sig{};
    crypto_sign_detached(sig.data(), nullptr,
                         reinterpret_cast<const unsigned char*>(message.data()),
                         message.size(), secret_.data());
    return base64url_encode(sig.data(), sig.size());
  }

 private:
  void expand() {
    crypto_sign_seed_keypair(public_.data(), secret_.data(), seed_.data());
  }

  static std::string base64url_encode(const unsigned char* data, std::size_t len) {
    std::string out(sodium_base64_ENCODED_LEN(len, sodium_base64_VARIANT_URLSAFE_NO_PADDING), '\0');
    sodium_bin2base64(out.data(), out.size(), data, len,
                      sodium_base64_VARIANT_URLSAFE_NO_PADDING);
    out.resize(std::char_traits<char>::length(out.c_str()));
    return out;
  }

  std::array<unsigned char, crypto_sign_SEEDBYTES> seed_{};
  std::array<unsigned char, crypto_sign_PUBLICKEYBYTES> public_{};
  std::array<unsigned char, crypto_sign_SECRETKEYBYTES> secret_{};
};

inline bool verify_b64url(const VerifyKey& key, std::string_view message,
                          const std::string& signature_b64url) {
  detail::ensure_sodium_init();
  std::array<unsigned char, crypto_sign_BYTES> sig{};
  std::size_t sig_len = 0;
  if (sodium_base642bin(sig.data(), sig.size(), signature_b64url.data(),
                        signature_b64url.size(), nullptr, &sig_len, nullptr,
                        sodium_base64_VARIANT_URLSAFE_NO_PADDING) != 0) {
    return false;
  }
  if (sig_len != crypto_sign_BYTES) return false;
  return crypto_sign_verify_detached(
             sig.data(), reinterpret_cast<const unsigned char*>(message.data()),
             message.size(), key.bytes.data()) == 0;
}

}  // namespace acp
