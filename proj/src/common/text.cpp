#include "dikw/common/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "dikw/common/error.hpp"

namespace dikw::text {

std::size_t scalar_count(std::string_view utf8) {
  std::size_t count = 0;
  int32_t i = 0;
  const auto len = static_cast<int32_t>(utf8.size());
  const auto* s = reinterpret_cast<const uint8_t*>(utf8.data());
  while (i < len) {
    UChar32 c;
    U8_NEXT(s, i, len, c);
    if (c < 0) throw Error(ErrorCode::MalformedInput, "invalid UTF-8 sequence", {{"byte_offset", i}});
    ++count;
  }
  return count;
}

namespace {

icu::UnicodeString to_nfc(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorCode::Io, "ICU NFC normalizer unavailable");
  auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  icu::UnicodeString out = norm->normalize(src, status);
  if (U_FAILURE(status)) throw Error(ErrorCode::MalformedInput, "NFC normalization failed");
  return out;
}

std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

}  // namespace

std::string nfc(std::string_view utf8) { return to_utf8(to_nfc(utf8)); }

std::string fold_for_match(std::string_view utf8) {
  auto s = to_nfc(utf8);
  s.foldCase();
  return to_utf8(s);
}

std::optional<Match> find_folded(std::string_view haystack, std::string_view needle) {
  const std::string h = fold_for_match(haystack);
  const std::string n = fold_for_match(needle);
  if (n.empty()) return std::nullopt;
  auto pos = h.find(n);
  if (pos == std::string::npos) return std::nullopt;
  return Match{scalar_count(std::string_view(h).substr(0, pos)), n};
}

}  // namespace dikw::text
