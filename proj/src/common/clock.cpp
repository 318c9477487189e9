#include "dikw/common/clock.hpp"

#include <cstdio>
#include <ctime>

#include "dikw/common/error.hpp"

namespace dikw {

std::string format_rfc3339(Timestamp t) {
  std::time_t tt = t.time_since_epoch().count();
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Timestamp parse_rfc3339(std::string_view text) {
  std::string s(text);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char tail = 0;
  int matched = std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &sec, &tail);
  if (matched == 3) {
    h = mi = sec = 0;
  } else if (matched != 7 || tail != 'Z') {
    throw Error(ErrorCode::MalformedInput, "expected RFC-3339 UTC timestamp", {{"value", s}});
  }
  using namespace std::chrono;
  auto ymd = year{y} / month{static_cast<unsigned>(mo)} / day{static_cast<unsigned>(d)};
  if (!ymd.ok()) throw Error(ErrorCode::MalformedInput, "invalid calendar date", {{"value", s}});
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec};
}

Timestamp SystemClock::now() const {
  return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

std::shared_ptr<const Clock> make_clock(std::string_view spec) {
  if (spec.empty() || spec == "system") return std::make_shared<SystemClock>();
  constexpr std::string_view kFixed = "fixed:";
  if (spec.substr(0, kFixed.size()) == kFixed) {
    return std::make_shared<FixedClock>(parse_rfc3339(spec.substr(kFixed.size())));
  }
  throw Error(ErrorCode::MalformedInput, "clock must be 'system' or 'fixed:<rfc3339>'", {{"value", std::string(spec)}});
}

}  // namespace dikw
