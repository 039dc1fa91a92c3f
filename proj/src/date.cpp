#include "btydnn/date.hpp"

#include <charconv>
#include <cstdio>

#include "btydnn/error.hpp"

namespace btydnn {

namespace {

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorKind::kParse, "bad date '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

Date Date::from_ymd(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) {
    fail(ErrorKind::kParse, "invalid calendar date " + std::to_string(y) +
                                "-" + std::to_string(m) + "-" +
                                std::to_string(d));
  }
  return Date(sys_days{ymd});
}

Date Date::parse(std::string_view text) {
  if (text.size() == 8) {
    return from_ymd(parse_int(text.substr(0, 4), text),
                    parse_int(text.substr(4, 2), text),
                    parse_int(text.substr(6, 2), text));
  }
  if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    return from_ymd(parse_int(text.substr(0, 4), text),
                    parse_int(text.substr(5, 2), text),
                    parse_int(text.substr(8, 2), text));
  }
  fail(ErrorKind::kParse, "bad date '" + std::string(text) + "'");
}

std::string Date::iso() const {
  std::chrono::year_month_day ymd{days_};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

std::string Date::compact() const {
  std::chrono::year_month_day ymd{days_};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d%02u%02u", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

}  // namespace btydnn
