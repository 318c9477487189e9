#include "dikw/common/canonical.hpp"

#include <cctype>
#include <cmath>

#include "dikw/common/error.hpp"

namespace dikw {

namespace {

void check_finite(const nlohmann::json& v) {
  if (v.is_number_float() && !std::isfinite(v.get<double>())) {
    throw Error(ErrorCode::MalformedInput, "non-finite number cannot be canonicalized");
  }
  if (v.is_structured()) {
    for (const auto& child : v) check_finite(child);
  }
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::string canonical_dump(const nlohmann::json& value) {
  check_finite(value);
  // nlohmann::json objects are std::map-backed, so dump() already emits keys
  // in byte order; floats use the shortest round-trip representation.
  return value.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

Digest canonical_digest(const nlohmann::json& value) { return sha256(canonical_dump(value)); }

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

nlohmann::json normalize_strings(const nlohmann::json& value) {
  if (value.is_string()) return normalize_whitespace(value.get_ref<const std::string&>());
  if (value.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (auto it = value.begin(); it != value.end(); ++it) out[it.key()] = normalize_strings(it.value());
    return out;
  }
  if (value.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& child : value) out.push_back(normalize_strings(child));
    return out;
  }
  return value;
}

std::string lowercase_ascii(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace dikw
