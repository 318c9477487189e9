#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "dikw/common/digest.hpp"

namespace dikw {

// Canonical byte form of a JSON value: UTF-8, byte-lexicographically sorted
// object keys, no insignificant whitespace, shortest round-trip numbers.
// Non-finite numbers are rejected.
std::string canonical_dump(const nlohmann::json& value);

Digest canonical_digest(const nlohmann::json& value);

// Trim and collapse every run of ASCII whitespace to a single space.
std::string normalize_whitespace(std::string_view text);

// Apply normalize_whitespace to every string (keys untouched) in a JSON tree.
nlohmann::json normalize_strings(const nlohmann::json& value);

std::string lowercase_ascii(std::string_view text);

}  // namespace dikw
