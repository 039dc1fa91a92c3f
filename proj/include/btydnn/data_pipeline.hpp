#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "btydnn/date.hpp"

namespace btydnn {

struct TransactionRecord {
  std::string customer_id;
  Date date;
  double spend = 0.0;
  std::optional<long> units;  // absent for datasets without item counts
};

// Records sorted by (customer_id, date); start/end bound every record date.
struct TransactionLog {
  std::vector<TransactionRecord> records;
  Date start_date;
  Date end_date;

  bool has_units() const;
  std::size_t customer_count() const;
  std::vector<std::string> customer_ids() const;  // sorted, distinct
};

struct CohortSplit {
  std::vector<std::string> train_ids;  // sorted
  std::vector<std::string> test_ids;   // sorted
  Date split_date;
  double holdout_length_weeks = 0.0;
};

// Per-customer calibration statistics in weeks, plus holdout ground truth.
struct CalibrationSummary {
  std::string customer_id;
  long x = 0;        // repeat purchases in calibration
  double t_x = 0.0;  // recency
  double T = 0.0;    // calibration length
  std::vector<double> covariates;
  long holdout_count = 0;
};

// Sorts records and fills start/end from the observed dates.
TransactionLog make_log(std::vector<TransactionRecord> records);

// Whitespace-separated `id YYYYMMDD units spend` rows.
TransactionLog ingest_cdnow(const std::filesystem::path& path);
// CSV with header `customer_id,date,spend[,units]`, ISO-8601 dates.
TransactionLog ingest_csv(const std::filesystem::path& path);
void write_transactions_csv(const TransactionLog& log,
                            const std::filesystem::path& path);

TransactionLog merge_same_day(const TransactionLog& log);

// Random customer-level split; |train| = round(train_fraction * N).
// Leaves split_date / holdout length unset.
CohortSplit split_customers(const TransactionLog& log, double train_fraction,
                            std::uint64_t seed);

// start + floor((end - start) / 2) days.
Date mid_date(const TransactionLog& log);

// Sets split_date and the holdout length (end_date - split_date) in weeks.
void set_split_date(CohortSplit& split, const TransactionLog& log,
                    Date split_date);

enum class Covariate { kTotalUnits, kTotalSpend, kMeanSpend };

Covariate parse_covariate(const std::string& name);
std::string covariate_name(Covariate c);

// Calibration-period covariates, one vector per id, in `ids` order.
// Customers with no calibration record get an empty vector.
std::vector<std::vector<double>> extract_covariates(
    const TransactionLog& log, const CohortSplit& split,
    const std::vector<std::string>& ids,
    const std::vector<Covariate>& covariates);

// Summaries for `ids` in the given order. Same-day merging is applied here;
// customers whose first purchase is on or after split_date are dropped with
// a warning on stderr (T would not be positive).
std::vector<CalibrationSummary> summarize_rfm(
    const TransactionLog& log, const CohortSplit& split,
    const std::vector<std::string>& ids,
    const std::vector<Covariate>& covariates = {});

void write_summaries_csv(const std::vector<CalibrationSummary>& summaries,
                         const std::vector<std::string>& covariate_names,
                         const std::filesystem::path& path);
// Returns summaries and fills `covariate_names` from the `cov_*` columns.
std::vector<CalibrationSummary> read_summaries_csv(
    const std::filesystem::path& path,
    std::vector<std::string>* covariate_names = nullptr);

}  // namespace btydnn
