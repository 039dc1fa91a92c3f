#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "btydnn/data_pipeline.hpp"
#include "btydnn/pareto_nbd.hpp"

namespace btydnn {

enum class Rounding { kHalfAwayFromZero, kFloor };

Rounding parse_rounding(const std::string& name);
std::string rounding_name(Rounding r);
long round_count(double expected, Rounding mode);

struct CustomerForecast {
  std::string customer_id;
  double p_alive = 0.0;
  bool inactive_pred = false;  // p_alive < threshold
  double expected_purchases = 0.0;
  long count_pred = 0;
};

CustomerForecast forecast(const CalibrationSummary& s, const IndividualParams& p,
                          double horizon_weeks, double threshold,
                          Rounding rounding = Rounding::kHalfAwayFromZero);

std::vector<CustomerForecast> forecast_all(
    const std::vector<CalibrationSummary>& summaries,
    const std::vector<IndividualParams>& params, double horizon_weeks, double threshold,
    Rounding rounding = Rounding::kHalfAwayFromZero);

// Bins 0..cap-1 plus an overflow bin "cap+" at index cap.
struct CountHistogram {
  int cap = 7;
  std::vector<long> counts;

  long total() const;
  bool operator==(const CountHistogram&) const = default;
};

CountHistogram histogram(const std::vector<long>& counts, int cap);

// `customer_id,p_alive,inactive_pred,expected,count_pred`
void write_forecast_csv(const std::vector<CustomerForecast>& forecasts,
                        const std::filesystem::path& path);
std::vector<CustomerForecast> read_forecast_csv(const std::filesystem::path& path);

}  // namespace btydnn
