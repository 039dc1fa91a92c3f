#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace btydnn {

// Calendar date stored as a day count since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days d) : days_(d) {}

  static Date from_ymd(int y, unsigned m, unsigned d);
  // Accepts YYYYMMDD (compact) or YYYY-MM-DD (ISO). Throws kParse on error.
  static Date parse(std::string_view text);

  std::string iso() const;
  std::string compact() const;

  constexpr std::chrono::sys_days sys() const { return days_; }
  constexpr long serial() const { return days_.time_since_epoch().count(); }

  constexpr Date plus_days(long n) const {
    return Date(days_ + std::chrono::days(n));
  }
  friend constexpr long operator-(Date a, Date b) {
    return (a.days_ - b.days_).count();
  }
  friend constexpr auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

inline constexpr double kDaysPerWeek = 7.0;

constexpr double weeks_between(Date from, Date to) {
  return static_cast<double>(to - from) / kDaysPerWeek;
}

}  // namespace btydnn
