#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace ffoundry {

// UTC instant with second resolution. Parsed from ISO 8601 with an explicit
// offset ("Z" or "+hh:mm"); date-only input is taken as midnight UTC.
// Comparison is chronological (epoch order), never textual.
class UtcTime {
 public:
  UtcTime() = default;
  explicit UtcTime(std::int64_t epoch_seconds) : epoch_(epoch_seconds) {}

  static std::optional<UtcTime> parse(const std::string& text);
  // Throws Error(PreconditionViolation) on malformed input.
  static UtcTime parse_or_throw(const std::string& text);
  static UtcTime from_ymd(int year, int month, int day,
                          int hour = 0, int minute = 0, int second = 0);
  static UtcTime now();

  std::int64_t epoch_seconds() const { return epoch_; }

  // "YYYY-MM-DDTHH:MM:SSZ"
  std::string to_iso8601() const;
  // "YYYY-MM-DD"
  std::string to_date() const;

  friend bool operator==(UtcTime a, UtcTime b) { return a.epoch_ == b.epoch_; }
  friend bool operator!=(UtcTime a, UtcTime b) { return a.epoch_ != b.epoch_; }
  friend bool operator<(UtcTime a, UtcTime b) { return a.epoch_ < b.epoch_; }
  friend bool operator<=(UtcTime a, UtcTime b) { return a.epoch_ <= b.epoch_; }
  friend bool operator>(UtcTime a, UtcTime b) { return a.epoch_ > b.epoch_; }
  friend bool operator>=(UtcTime a, UtcTime b) { return a.epoch_ >= b.epoch_; }

 private:
  std::int64_t epoch_ = 0;
};

}  // namespace ffoundry
