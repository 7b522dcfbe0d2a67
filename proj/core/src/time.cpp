#include "ffoundry/time.hpp"

#include <chrono>
#include <cstdio>

#include "ffoundry/error.hpp"

namespace ffoundry {

namespace {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

bool parse_int(const std::string& s, size_t pos, size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

std::optional<UtcTime> UtcTime::parse(const std::string& text) {
  // "YYYY-MM-DD" or "YYYY-MM-DD[T ]HH:MM[:SS][.frac](Z|+hh:mm|-hh:mm)"
  int y, mo, d;
  if (!parse_int(text, 0, 4, y) || text.size() < 10 ||
      text[4] != '-' || text[7] != '-' ||
      !parse_int(text, 5, 2, mo) || !parse_int(text, 8, 2, d)) {
    return std::nullopt;
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;

  int h = 0, mi = 0, se = 0;
  std::int64_t offset = 0;
  if (text.size() > 10) {
    if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
    if (!parse_int(text, 11, 2, h) || text.size() < 16 || text[13] != ':' ||
        !parse_int(text, 14, 2, mi)) {
      return std::nullopt;
    }
    size_t pos = 16;
    if (pos < text.size() && text[pos] == ':') {
      if (!parse_int(text, pos + 1, 2, se)) return std::nullopt;
      pos += 3;
    }
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
    if (pos >= text.size()) return std::nullopt;  // offset is mandatory
    if (text[pos] == 'Z' || text[pos] == 'z') {
      if (pos + 1 != text.size()) return std::nullopt;
    } else if (text[pos] == '+' || text[pos] == '-') {
      int oh, om = 0;
      if (!parse_int(text, pos + 1, 2, oh)) return std::nullopt;
      size_t opos = pos + 3;
      if (opos < text.size() && text[opos] == ':') ++opos;
      if (opos < text.size() && !parse_int(text, opos, 2, om)) return std::nullopt;
      offset = (text[pos] == '+' ? 1 : -1) * (oh * 3600LL + om * 60LL);
    } else {
      return std::nullopt;
    }
    if (h > 23 || mi > 59 || se > 60) return std::nullopt;
  }

  std::int64_t epoch =
      days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se - offset;
  return UtcTime(epoch);
}

UtcTime UtcTime::parse_or_throw(const std::string& text) {
  auto t = parse(text);
  if (!t) throw Error(ErrorCode::PreconditionViolation, "bad timestamp: " + text);
  return *t;
}

UtcTime UtcTime::from_ymd(int year, int month, int day, int hour, int minute,
                          int second) {
  return UtcTime(days_from_civil(year, month, day) * 86400 + hour * 3600 +
                 minute * 60 + second);
}

UtcTime UtcTime::now() {
  return UtcTime(std::chrono::duration_cast<std::chrono::seconds>(
                     std::chrono::system_clock::now().time_since_epoch())
                     .count());
}

std::string UtcTime::to_iso8601() const {
  std::int64_t days = epoch_ / 86400;
  std::int64_t rem = epoch_ % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

std::string UtcTime::to_date() const { return to_iso8601().substr(0, 10); }

}  // namespace ffoundry
