#include "btydnn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "json.hpp"

#include "btydnn/error.hpp"
#include "text_util.hpp"

namespace btydnn {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  require(a == b, ErrorKind::kInvalidArgument,
          "length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  require(a > 0, ErrorKind::kInvalidArgument, "metric of empty vectors");
}

double match_rate(const std::vector<long>& a, const std::vector<long>& b) {
  check_lengths(a.size(), b.size());
  long hits = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hits += a[i] == b[i] ? 1 : 0;
  return double(hits) / double(a.size());
}

}  // namespace

ConfusionMatrix confusion(const std::vector<bool>& actual_inactive,
                          const std::vector<bool>& predicted_inactive) {
  check_lengths(actual_inactive.size(), predicted_inactive.size());
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < actual_inactive.size(); ++i) {
    const bool actual_active = !actual_inactive[i];
    const bool pred_active = !predicted_inactive[i];
    if (actual_active && pred_active) ++cm.tp;
    else if (actual_active) ++cm.fn;
    else if (pred_active) ++cm.fp;
    else ++cm.tn;
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  require(cm.tp >= 0 && cm.fn >= 0 && cm.fp >= 0 && cm.tn >= 0 && cm.total() > 0,
          ErrorKind::kInvalidArgument, "accuracy of an empty confusion matrix");
  return double(cm.tp + cm.tn) / double(cm.total());
}

double multi_accuracy(const std::vector<long>& y, const std::vector<long>& y_hat) {
  return match_rate(y, y_hat);
}

double mae_metric(const std::vector<long>& y, const std::vector<long>& y_hat) {
  check_lengths(y.size(), y_hat.size());
  long total = 0;
  for (std::size_t i = 0; i < y.size(); ++i) total += std::labs(y[i] - y_hat[i]);
  return double(total) / double(y.size());
}

double consistency(const std::vector<long>& y_a, const std::vector<long>& y_b) {
  return match_rate(y_a, y_b);
}

CountHistogram actual_histogram(const std::vector<CalibrationSummary>& actual, int cap) {
  std::vector<long> counts;
  counts.reserve(actual.size());
  for (const auto& s : actual) counts.push_back(s.holdout_count);
  return histogram(counts, cap);
}

MetricsReport evaluate(const std::string& model,
                       const std::vector<CustomerForecast>& forecasts,
                       const std::vector<CalibrationSummary>& actual, int cap,
                       const std::vector<CustomerForecast>* baseline) {
  check_lengths(forecasts.size(), actual.size());
  std::unordered_map<std::string_view, const CalibrationSummary*> truth;
  truth.reserve(actual.size());
  for (const auto& s : actual) truth.emplace(s.customer_id, &s);

  std::unordered_map<std::string_view, long> base_counts;
  if (baseline) {
    for (const auto& b : *baseline) base_counts.emplace(b.customer_id, b.count_pred);
  }

  std::vector<bool> actual_inactive, pred_inactive;
  std::vector<long> y, y_hat, y_base;
  MetricsReport r;
  r.model = model;
  for (const auto& f : forecasts) {
    auto it = truth.find(f.customer_id);
    require(it != truth.end(), ErrorKind::kInvalidArgument,
            "no holdout truth for customer " + f.customer_id);
    actual_inactive.push_back(it->second->holdout_count == 0);
    pred_inactive.push_back(f.inactive_pred);
    y.push_back(it->second->holdout_count);
    y_hat.push_back(f.count_pred);
    r.total_purchases += double(f.count_pred);
    r.total_expected += f.expected_purchases;
    if (baseline) {
      auto b = base_counts.find(f.customer_id);
      require(b != base_counts.end(), ErrorKind::kInvalidArgument,
              "baseline has no forecast for customer " + f.customer_id);
      y_base.push_back(b->second);
    }
  }
  r.confusion = confusion(actual_inactive, pred_inactive);
  r.inactive_accuracy = accuracy(r.confusion);
  r.multi_accuracy = multi_accuracy(y, y_hat);
  r.mae = mae_metric(y, y_hat);
  if (baseline) r.consistency = consistency(y_hat, y_base);
  r.histogram = histogram(y_hat, cap);
  return r;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  check_lengths(a.size(), b.size());
  const double n = double(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrelationMatrix metric_correlations(const std::vector<MetricsReport>& reports) {
  require(reports.size() >= 3, ErrorKind::kInvalidArgument,
          "correlations need at least 3 reports");
  std::vector<std::vector<double>> cols(4);
  for (const auto& r : reports) {
    require(r.consistency.has_value(), ErrorKind::kInvalidArgument,
            "report '" + r.model + "' has no consistency value");
    cols[0].push_back(r.multi_accuracy);
    cols[1].push_back(r.mae);
    cols[2].push_back(r.total_purchases);
    cols[3].push_back(*r.consistency);
  }
  CorrelationMatrix m;
  m.names.assign(std::begin(kCorrelationMetrics), std::end(kCorrelationMetrics));
  m.values.assign(4, std::vector<std::optional<double>>(4));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      m.values[i][j] = i == j ? (pearson(cols[i], cols[i]) ? std::optional(1.0) : std::nullopt)
                              : pearson(cols[i], cols[j]);
    }
  }
  return m;
}

std::string report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["inactive_accuracy"] = r.inactive_accuracy;
  j["multi_accuracy"] = r.multi_accuracy;
  j["mae"] = r.mae;
  j["consistency"] = r.consistency ? nlohmann::ordered_json(*r.consistency) : nullptr;
  j["total_purchases"] = r.total_purchases;
  j["total_expected"] = r.total_expected;
  j["confusion"] = {{"tp", r.confusion.tp},
                    {"fn", r.confusion.fn},
                    {"fp", r.confusion.fp},
                    {"tn", r.confusion.tn}};
  j["histogram"] = {{"cap", r.histogram.cap}, {"counts", r.histogram.counts}};
  return j.dump(2);
}

void write_report_json(const MetricsReport& r, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << report_json(r) << '\n';
}

void write_metrics_table_csv(const std::vector<MetricsReport>& reports,
                             const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "model,inactive_accuracy,multi_accuracy,mae,consistency,total_purchases\n";
  for (const auto& r : reports) {
    out << r.model << ',' << detail::fmt(r.inactive_accuracy) << ','
        << detail::fmt(r.multi_accuracy) << ',' << detail::fmt(r.mae) << ','
        << (r.consistency ? detail::fmt(*r.consistency) : std::string("NA")) << ','
        << detail::fmt(r.total_purchases) << '\n';
  }
}

void write_histogram_csv(const CountHistogram& actual,
                         const std::vector<MetricsReport>& reports,
                         const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "model";
  for (int k = 0; k < actual.cap; ++k) out << ',' << k;
  out << ',' << actual.cap << "+\n";
  auto row = [&](const std::string& name, const CountHistogram& h) {
    require(h.cap == actual.cap, ErrorKind::kInvalidArgument, "histogram caps differ");
    out << name;
    for (long c : h.counts) out << ',' << c;
    out << '\n';
  };
  row("actual", actual);
  for (const auto& r : reports) row(r.model, r.histogram);
}

void write_correlation_csv(const CorrelationMatrix& m, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "# Pearson correlation across models; few points per column, read with care\n";
  out << "metric";
  for (const auto& n : m.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < m.names.size(); ++i) {
    out << m.names[i];
    for (const auto& v : m.values[i]) {
      out << ',' << (v ? detail::fmt(*v) : std::string("NA"));
    }
    out << '\n';
  }
}

}  // namespace btydnn
