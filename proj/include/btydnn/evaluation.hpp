#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "btydnn/prediction.hpp"

namespace btydnn {

// Rows are actual status, columns predicted; the positive class is Active.
struct ConfusionMatrix {
  long tp = 0;  // actual active, predicted active
  long fn = 0;  // actual active, predicted inactive
  long fp = 0;  // actual inactive, predicted active
  long tn = 0;  // actual inactive, predicted inactive

  long total() const { return tp + fn + fp + tn; }
};

// `actual_inactive[i]` is holdout_count == 0.
ConfusionMatrix confusion(const std::vector<bool>& actual_inactive,
                          const std::vector<bool>& predicted_inactive);

double accuracy(const ConfusionMatrix& cm);
double multi_accuracy(const std::vector<long>& y, const std::vector<long>& y_hat);
double mae_metric(const std::vector<long>& y, const std::vector<long>& y_hat);
double consistency(const std::vector<long>& y_a, const std::vector<long>& y_b);

struct MetricsReport {
  std::string model;
  ConfusionMatrix confusion;
  double inactive_accuracy = 0.0;
  double multi_accuracy = 0.0;
  double mae = 0.0;
  std::optional<double> consistency;  // against the baseline model
  double total_purchases = 0.0;       // sum of integer forecasts
  double total_expected = 0.0;        // sum of continuous forecasts
  CountHistogram histogram;
};

// Scores forecasts against the holdout truth in `actual` (matched by
// customer id). `baseline`, when given, supplies the consistency reference.
MetricsReport evaluate(const std::string& model,
                       const std::vector<CustomerForecast>& forecasts,
                       const std::vector<CalibrationSummary>& actual, int cap,
                       const std::vector<CustomerForecast>* baseline = nullptr);

// Truth row for the histogram table: actual holdout counts.
CountHistogram actual_histogram(const std::vector<CalibrationSummary>& actual, int cap);

inline constexpr const char* kCorrelationMetrics[] = {"multi_accuracy", "mae",
                                                      "total_purchases", "consistency"};

// Pearson correlations across reports; entries involving a zero-variance
// column are nullopt.
struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<std::optional<double>>> values;
};

CorrelationMatrix metric_correlations(const std::vector<MetricsReport>& reports);

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

// JSON object for one report (`model`, metrics, confusion, histogram).
std::string report_json(const MetricsReport& r);
void write_report_json(const MetricsReport& r, const std::filesystem::path& path);
// `model,inactive_accuracy,multi_accuracy,mae,consistency,total_purchases`
void write_metrics_table_csv(const std::vector<MetricsReport>& reports,
                             const std::filesystem::path& path);
// `model,0,1,...,cap-1,cap+` with the actual counts first.
void write_histogram_csv(const CountHistogram& actual,
                         const std::vector<MetricsReport>& reports,
                         const std::filesystem::path& path);
void write_correlation_csv(const CorrelationMatrix& m, const std::filesystem::path& path);

}  // namespace btydnn
