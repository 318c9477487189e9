#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>

#include "dikw/common/error.hpp"

namespace dikw {

template <class E, std::size_t N>
using TokenTable = std::array<std::pair<E, std::string_view>, N>;

namespace detail {

inline std::string fold_token(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '_' || c == '-' || c == ' ') continue;
    out.push_back(static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c));
  }
  return out;
}

}  // namespace detail

template <class E, std::size_t N>
std::string_view token_of(const TokenTable<E, N>& table, E value) {
  for (const auto& [e, tok] : table) {
    if (e == value) return tok;
  }
  return "unknown";
}

// Accepts any casing and ignores '_', '-' and ' ' so "SocialProof",
// "social_proof" and "socialproof" all parse.
template <class E, std::size_t N>
E parse_token(const TokenTable<E, N>& table, std::string_view text, std::string_view what,
              ErrorCode code = ErrorCode::MalformedInput) {
  const auto folded = detail::fold_token(text);
  for (const auto& [e, tok] : table) {
    if (detail::fold_token(tok) == folded) return e;
  }
  throw Error(code, "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace dikw
