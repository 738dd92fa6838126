#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "acp/errors.hpp"

namespace acp {

namespace detail {

inline void append_canonical_string(const std::string& s, std::string& out) {
  out.push_back('"');
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          static constexpr char kDigits[] = "0123456789abcdef";
          out += "\\u00";
          out.push_back(kDigits[c >> 4]);
          out.push_back(kDigits[c & 0x0f]);
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  out.push_back('"');
}

inline void append_canonical(const nlohmann::json& value, std::string& out) {
  using value_t = nlohmann::json::value_t;
  switch (value.type()) {
    case value_t::object: {
      // nlohmann objects are backed by std::map, so iteration order is the
      // byte-wise sorted key order the canonical form requires.
      out.push_back('{');
      bool first = true;
      for (const auto& [key, element] : value.items()) {
        if (!first) out.push_back(',');
        first = false;
        append_canonical_string(key, out);
        out.push_back(':');
        append_canonical(element, out);
      }
      out.push_back('}');
      break;
    }
    case value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& element : value) {
        if (!first) out.push_back(',');
        first = false;
        append_canonical(element, out);
      }
      out.push_back(']');
      break;
    }
    case value_t::string:
      append_canonical_string(value.get_ref<const std::string&>(), out);
      break;
    case value_t::boolean:
      out += value.get<bool>() ? "true" : "false";
      break;
    case value_t::number_integer:
      out += std::to_string(value.get<std::int64_t>());
      break;
    case value_t::number_unsigned:
      out += std::to_string(value.get<std::uint64_t>());
      break;
    case value_t::number_float:
      throw CanonicalError("floating-point values are not canonicalizable");
    case value_t::null:
      throw CanonicalError("null values are not canonicalizable");
    default:
      throw CanonicalError("unsupported value type in canonical serialization");
  }
}

}  // namespace detail

// Deterministic serialization of a structured value: keys sorted at every
// level, no insignificant whitespace, integers in shortest decimal form.
// Identical across processes and platforms. Strings, integers, booleans,
// arrays, and maps only; anything else is a CanonicalError.
inline std::string canonical_bytes(const nlohmann::json& value) {
  std::string out;
  detail::append_canonical(value, out);
  return out;
}

}  // namespace acp
