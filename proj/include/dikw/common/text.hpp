#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace dikw::text {

// Number of Unicode scalar values in a UTF-8 string. Throws MalformedInput on
// invalid UTF-8.
std::size_t scalar_count(std::string_view utf8);

std::string nfc(std::string_view utf8);

// NFC followed by full Unicode case folding; the form used for
// case-insensitive token matching.
std::string fold_for_match(std::string_view utf8);

struct Match {
  std::size_t scalar_offset;  // in the folded haystack
  std::string matched;
};

// Case-insensitive substring search after NFC + case folding.
std::optional<Match> find_folded(std::string_view haystack, std::string_view needle);

}  // namespace dikw::text
