#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

namespace dikw {

// 256-bit SHA-256 digest. Fixed for the whole repository; artifact files
// record the algorithm name alongside each digest.
struct Digest {
  static constexpr std::string_view kAlgorithm = "sha256";

  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  static Digest from_hex(std::string_view hex);

  auto operator<=>(const Digest&) const = default;
};

Digest sha256(std::string_view data);

// Incremental hasher for streaming inputs (dataset rows).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view data);
  Digest finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dikw
