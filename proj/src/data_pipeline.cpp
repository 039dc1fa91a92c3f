#include "btydnn/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <unordered_map>

#include "btydnn/error.hpp"
#include "btydnn/random.hpp"
#include "text_util.hpp"

namespace btydnn {

using detail::fmt;
using detail::where;

namespace {

bool record_less(const TransactionRecord& a, const TransactionRecord& b) {
  if (a.customer_id != b.customer_id) return a.customer_id < b.customer_id;
  return a.date < b.date;
}

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Maps each customer id to its [begin, end) slice of a sorted record list.
using CustomerIndex =
    std::unordered_map<std::string_view, std::pair<std::size_t, std::size_t>>;

CustomerIndex index_customers(const std::vector<TransactionRecord>& records) {
  CustomerIndex index;
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i;
    while (j < records.size() && records[j].customer_id == records[i].customer_id) ++j;
    index.emplace(records[i].customer_id, std::make_pair(i, j));
    i = j;
  }
  return index;
}

}  // namespace

bool TransactionLog::has_units() const {
  return !records.empty() &&
         std::all_of(records.begin(), records.end(),
                     [](const TransactionRecord& r) { return r.units.has_value(); });
}

std::vector<std::string> TransactionLog::customer_ids() const {
  std::vector<std::string> ids;
  for (const auto& r : records) {
    if (ids.empty() || ids.back() != r.customer_id) ids.push_back(r.customer_id);
  }
  if (!std::is_sorted(ids.begin(), ids.end())) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  return ids;
}

std::size_t TransactionLog::customer_count() const { return customer_ids().size(); }

TransactionLog make_log(std::vector<TransactionRecord> records) {
  require(!records.empty(), ErrorKind::kParse, "no records");
  std::stable_sort(records.begin(), records.end(), record_less);
  TransactionLog log;
  auto [lo, hi] = std::minmax_element(
      records.begin(), records.end(),
      [](const auto& a, const auto& b) { return a.date < b.date; });
  log.start_date = lo->date;
  log.end_date = hi->date;
  log.records = std::move(records);
  return log;
}

TransactionLog ingest_cdnow(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::vector<TransactionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    // Some distributions of the file prepend a column-name row.
    if (line_no == 1 && !all_digits(fields[0])) continue;
    if (fields.size() != 4) {
      fail(ErrorKind::kParse, where(path, line_no) + ": expected 4 fields, got " +
                                  std::to_string(fields.size()));
    }
    TransactionRecord r;
    r.customer_id = std::string(fields[0]);
    try {
      r.date = Date::parse(fields[1]);
    } catch (const Error& e) {
      fail(ErrorKind::kParse, where(path, line_no) + ": " + e.what());
    }
    long units = 0;
    if (!detail::try_long(fields[2], units) || units < 0) {
      fail(ErrorKind::kParse, where(path, line_no) + ": bad units '" +
                                  std::string(fields[2]) + "'");
    }
    r.units = units;
    if (!detail::try_double(fields[3], r.spend) || !(r.spend >= 0.0)) {
      fail(ErrorKind::kParse, where(path, line_no) + ": bad spend '" +
                                  std::string(fields[3]) + "'");
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) fail(ErrorKind::kParse, path.string() + ": no records");
  return make_log(std::move(records));
}

TransactionLog ingest_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kParse, path.string() + ": no records");
  const auto header = detail::split(line, ',');
  int col_id = -1, col_date = -1, col_spend = -1, col_units = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "customer_id") col_id = int(i);
    else if (header[i] == "date") col_date = int(i);
    else if (header[i] == "spend") col_spend = int(i);
    else if (header[i] == "units") col_units = int(i);
  }
  require(col_id >= 0 && col_date >= 0 && col_spend >= 0, ErrorKind::kParse,
          where(path, 1) + ": header must declare customer_id,date,spend");

  std::vector<TransactionRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != header.size()) {
      fail(ErrorKind::kParse, where(path, line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields");
    }
    TransactionRecord r;
    r.customer_id = std::string(f[col_id]);
    require(!r.customer_id.empty(), ErrorKind::kParse,
            where(path, line_no) + ": empty customer_id");
    try {
      r.date = Date::parse(f[col_date]);
    } catch (const Error& e) {
      fail(ErrorKind::kParse, where(path, line_no) + ": " + e.what());
    }
    if (!detail::try_double(f[col_spend], r.spend) || !(r.spend >= 0.0)) {
      fail(ErrorKind::kParse, where(path, line_no) + ": bad spend");
    }
    if (col_units >= 0) {
      long units = 0;
      if (!detail::try_long(f[col_units], units) || units < 0) {
        fail(ErrorKind::kParse, where(path, line_no) + ": bad units");
      }
      r.units = units;
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) fail(ErrorKind::kParse, path.string() + ": no records");
  return make_log(std::move(records));
}

void write_transactions_csv(const TransactionLog& log,
                            const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  const bool units = log.has_units();
  out << (units ? "customer_id,date,spend,units\n" : "customer_id,date,spend\n");
  for (const auto& r : log.records) {
    out << r.customer_id << ',' << r.date.iso() << ',' << fmt(r.spend);
    if (units) out << ',' << *r.units;
    out << '\n';
  }
}

TransactionLog merge_same_day(const TransactionLog& log) {
  std::vector<TransactionRecord> sorted = log.records;
  std::stable_sort(sorted.begin(), sorted.end(), record_less);
  TransactionLog merged;
  merged.start_date = log.start_date;
  merged.end_date = log.end_date;
  merged.records.reserve(sorted.size());
  for (auto& r : sorted) {
    if (!merged.records.empty()) {
      auto& last = merged.records.back();
      if (last.customer_id == r.customer_id && last.date == r.date) {
        last.spend += r.spend;
        if (last.units && r.units) {
          *last.units += *r.units;
        } else {
          last.units.reset();
        }
        continue;
      }
    }
    merged.records.push_back(std::move(r));
  }
  return merged;
}

CohortSplit split_customers(const TransactionLog& log, double train_fraction,
                            std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::kInvalidArgument,
          "train fraction must lie in (0, 1)");
  auto ids = log.customer_ids();
  require(ids.size() >= 2, ErrorKind::kInvalidArgument,
          "split needs at least 2 customers");
  Rng rng(seed);
  shuffle(std::span<std::string>(ids), rng);
  const auto n_train =
      static_cast<std::size_t>(std::llround(train_fraction * double(ids.size())));
  CohortSplit split;
  split.train_ids.assign(ids.begin(), ids.begin() + long(n_train));
  split.test_ids.assign(ids.begin() + long(n_train), ids.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

Date mid_date(const TransactionLog& log) {
  const long span = log.end_date - log.start_date;
  require(span > 0, ErrorKind::kInvalidArgument,
          "mid date undefined for a single-day log");
  return log.start_date.plus_days(span / 2);
}

void set_split_date(CohortSplit& split, const TransactionLog& log, Date split_date) {
  require(split_date < log.end_date, ErrorKind::kInvalidArgument,
          "split date must precede the end of the log");
  split.split_date = split_date;
  split.holdout_length_weeks = weeks_between(split_date, log.end_date);
}

Covariate parse_covariate(const std::string& name) {
  if (name == "total_units" || name == "units") return Covariate::kTotalUnits;
  if (name == "total_spend" || name == "spend") return Covariate::kTotalSpend;
  if (name == "mean_spend") return Covariate::kMeanSpend;
  fail(ErrorKind::kInvalidArgument, "unknown covariate '" + name + "'");
}

std::string covariate_name(Covariate c) {
  switch (c) {
    case Covariate::kTotalUnits: return "total_units";
    case Covariate::kTotalSpend: return "total_spend";
    case Covariate::kMeanSpend: return "mean_spend";
  }
  return "unknown";
}

namespace {

std::vector<double> covariates_for(const std::vector<TransactionRecord>& recs,
                                   std::size_t begin, std::size_t end, Date split_date,
                                   const std::vector<Covariate>& covariates) {
  double units = 0.0, spend = 0.0;
  std::size_t n = 0;
  for (std::size_t k = begin; k < end && recs[k].date <= split_date; ++k) {
    spend += recs[k].spend;
    if (recs[k].units) units += double(*recs[k].units);
    ++n;
  }
  std::vector<double> out;
  if (n == 0) return out;
  for (auto c : covariates) {
    switch (c) {
      case Covariate::kTotalUnits: out.push_back(units); break;
      case Covariate::kTotalSpend: out.push_back(spend); break;
      case Covariate::kMeanSpend: out.push_back(spend / double(n)); break;
    }
  }
  return out;
}

void check_units(const TransactionLog& log, const std::vector<Covariate>& covariates) {
  if (std::find(covariates.begin(), covariates.end(), Covariate::kTotalUnits) !=
          covariates.end() &&
      !log.has_units()) {
    fail(ErrorKind::kInvalidArgument,
         "covariate 'total_units' requested but the log has no unit counts");
  }
}

}  // namespace

std::vector<std::vector<double>> extract_covariates(
    const TransactionLog& log, const CohortSplit& split,
    const std::vector<std::string>& ids, const std::vector<Covariate>& covariates) {
  check_units(log, covariates);
  const auto merged = merge_same_day(log);
  const auto index = index_customers(merged.records);
  std::vector<std::vector<double>> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) {
      out.emplace_back();
      continue;
    }
    out.push_back(covariates_for(merged.records, it->second.first, it->second.second,
                                 split.split_date, covariates));
  }
  return out;
}

std::vector<CalibrationSummary> summarize_rfm(const TransactionLog& log,
                                              const CohortSplit& split,
                                              const std::vector<std::string>& ids,
                                              const std::vector<Covariate>& covariates) {
  check_units(log, covariates);
  const auto merged = merge_same_day(log);
  const auto& recs = merged.records;
  const auto index = index_customers(recs);
  std::vector<CalibrationSummary> out;
  out.reserve(ids.size());
  std::size_t dropped = 0;
  for (const auto& id : ids) {
    auto it = index.find(id);
    const auto [begin, end] =
        it == index.end() ? std::make_pair<std::size_t, std::size_t>(0, 0) : it->second;
    if (begin == end || recs[begin].date >= split.split_date) {
      ++dropped;
      continue;
    }
    CalibrationSummary s;
    s.customer_id = id;
    const Date first = recs[begin].date;
    Date last = first;
    long calibration = 0;
    for (std::size_t k = begin; k < end; ++k) {
      if (recs[k].date <= split.split_date) {
        ++calibration;
        last = recs[k].date;
      } else if (recs[k].date <= merged.end_date) {
        ++s.holdout_count;
      }
    }
    s.x = calibration - 1;
    s.t_x = weeks_between(first, last);
    s.T = weeks_between(first, split.split_date);
    if (!covariates.empty()) {
      s.covariates = covariates_for(recs, begin, end, split.split_date, covariates);
    }
    out.push_back(std::move(s));
  }
  if (dropped > 0) {
    std::cerr << "warning: " << dropped
              << " customer(s) first purchasing on or after the split date excluded\n";
  }
  return out;
}

void write_summaries_csv(const std::vector<CalibrationSummary>& summaries,
                         const std::vector<std::string>& covariate_names,
                         const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "customer_id,x,t_x,T,holdout_count";
  for (const auto& c : covariate_names) out << ",cov_" << c;
  out << '\n';
  for (const auto& s : summaries) {
    require(s.covariates.size() == covariate_names.size(), ErrorKind::kInvalidArgument,
            "covariate count mismatch for customer " + s.customer_id);
    out << s.customer_id << ',' << s.x << ',' << fmt(s.t_x) << ',' << fmt(s.T) << ','
        << s.holdout_count;
    for (double c : s.covariates) out << ',' << fmt(c);
    out << '\n';
  }
}

std::vector<CalibrationSummary> read_summaries_csv(
    const std::filesystem::path& path, std::vector<std::string>* covariate_names) {
  auto in = detail::open_in(path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::kParse,
          path.string() + ": empty summaries file");
  const auto header = detail::split(line, ',');
  require(header.size() >= 5 && header[0] == "customer_id" && header[1] == "x" &&
              header[2] == "t_x" && header[3] == "T" && header[4] == "holdout_count",
          ErrorKind::kParse,
          where(path, 1) + ": expected header customer_id,x,t_x,T,holdout_count");
  std::vector<std::string> names;
  for (std::size_t i = 5; i < header.size(); ++i) {
    require(header[i].substr(0, 4) == "cov_", ErrorKind::kParse,
            where(path, 1) + ": extra columns must be cov_*");
    names.emplace_back(header[i].substr(4));
  }
  std::vector<CalibrationSummary> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    require(f.size() == header.size(), ErrorKind::kParse,
            where(path, line_no) + ": wrong field count");
    CalibrationSummary s;
    s.customer_id = std::string(f[0]);
    bool ok = detail::try_long(f[1], s.x) && detail::try_double(f[2], s.t_x) &&
              detail::try_double(f[3], s.T) && detail::try_long(f[4], s.holdout_count);
    for (std::size_t i = 5; ok && i < f.size(); ++i) {
      double v = 0.0;
      ok = detail::try_double(f[i], v);
      s.covariates.push_back(v);
    }
    require(ok, ErrorKind::kParse, where(path, line_no) + ": malformed number");
    require(s.x >= 0 && s.t_x >= 0.0 && s.t_x <= s.T && s.holdout_count >= 0 &&
                (s.x > 0 || s.t_x == 0.0),
            ErrorKind::kParse, where(path, line_no) + ": invalid RFM values");
    out.push_back(std::move(s));
  }
  if (covariate_names) *covariate_names = std::move(names);
  return out;
}

}  // namespace btydnn
