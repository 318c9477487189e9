#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>

namespace dikw {

using Timestamp = std::chrono::sys_seconds;

// RFC-3339, UTC, second resolution: "2024-05-01T12:00:00Z".
std::string format_rfc3339(Timestamp t);
Timestamp parse_rfc3339(std::string_view text);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override;
};

// Always returns the same instant; used for reproducible runs.
class FixedClock final : public Clock {
 public:
  explicit FixedClock(Timestamp t) : t_(t) {}
  Timestamp now() const override { return t_; }

 private:
  Timestamp t_;
};

// "system" or "fixed:<rfc3339>".
std::shared_ptr<const Clock> make_clock(std::string_view spec);

}  // namespace dikw
