#include "btydnn/prediction.hpp"

#include <cmath>

#include "btydnn/error.hpp"
#include "text_util.hpp"

namespace btydnn {

Rounding parse_rounding(const std::string& name) {
  if (name == "nearest" || name == "half_away") return Rounding::kHalfAwayFromZero;
  if (name == "floor") return Rounding::kFloor;
  fail(ErrorKind::kInvalidArgument, "unknown rounding mode '" + name + "'");
}

std::string rounding_name(Rounding r) {
  return r == Rounding::kFloor ? "floor" : "nearest";
}

long round_count(double expected, Rounding mode) {
  require(expected >= 0.0 && std::isfinite(expected), ErrorKind::kDomain,
          "expected purchases must be finite and nonnegative");
  return mode == Rounding::kFloor ? static_cast<long>(std::floor(expected))
                                  : std::lround(expected);
}

CustomerForecast forecast(const CalibrationSummary& s, const IndividualParams& p,
                          double horizon_weeks, double threshold, Rounding rounding) {
  require(threshold >= 0.0 && threshold <= 1.0, ErrorKind::kInvalidArgument,
          "threshold must lie in [0, 1]");
  const IndividualParams q = clamp_rates(p);
  CustomerForecast f;
  f.customer_id = s.customer_id;
  f.p_alive = p_alive(s, q);
  f.inactive_pred = f.p_alive < threshold;
  f.expected_purchases = expected_holdout_purchases(s, q, horizon_weeks);
  f.count_pred = round_count(f.expected_purchases, rounding);
  return f;
}

std::vector<CustomerForecast> forecast_all(const std::vector<CalibrationSummary>& summaries,
                                           const std::vector<IndividualParams>& params,
                                           double horizon_weeks, double threshold,
                                           Rounding rounding) {
  require(summaries.size() == params.size(), ErrorKind::kInvalidArgument,
          "summary and parameter counts differ");
  std::vector<CustomerForecast> out;
  out.reserve(summaries.size());
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    out.push_back(forecast(summaries[i], params[i], horizon_weeks, threshold, rounding));
  }
  return out;
}

long CountHistogram::total() const {
  long t = 0;
  for (long c : counts) t += c;
  return t;
}

CountHistogram histogram(const std::vector<long>& counts, int cap) {
  require(cap > 0, ErrorKind::kInvalidArgument, "histogram cap must be positive");
  CountHistogram h;
  h.cap = cap;
  h.counts.assign(std::size_t(cap) + 1, 0);
  for (long c : counts) {
    require(c >= 0, ErrorKind::kInvalidArgument, "negative purchase count");
    ++h.counts[std::size_t(std::min<long>(c, cap))];
  }
  return h;
}

void write_forecast_csv(const std::vector<CustomerForecast>& forecasts,
                        const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "customer_id,p_alive,inactive_pred,expected,count_pred\n";
  for (const auto& f : forecasts) {
    out << f.customer_id << ',' << detail::fmt(f.p_alive) << ','
        << (f.inactive_pred ? 1 : 0) << ',' << detail::fmt(f.expected_purchases) << ','
        << f.count_pred << '\n';
  }
}

std::vector<CustomerForecast> read_forecast_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  require(std::getline(in, line) &&
              detail::trim(line) == "customer_id,p_alive,inactive_pred,expected,count_pred",
          ErrorKind::kParse,
          detail::where(path, 1) +
              ": expected header customer_id,p_alive,inactive_pred,expected,count_pred");
  std::vector<CustomerForecast> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    CustomerForecast c;
    long inactive = 0;
    const bool ok = f.size() == 5 && detail::try_double(f[1], c.p_alive) &&
                    detail::try_long(f[2], inactive) &&
                    detail::try_double(f[3], c.expected_purchases) &&
                    detail::try_long(f[4], c.count_pred) && (inactive == 0 || inactive == 1) &&
                    c.count_pred >= 0;
    require(ok, ErrorKind::kParse, detail::where(path, line_no) + ": malformed forecast row");
    c.customer_id = std::string(f[0]);
    c.inactive_pred = inactive == 1;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace btydnn
