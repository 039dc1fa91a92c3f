#pragma once

#include <cstdint>
#include <vector>

#include "btydnn/bayes.hpp"
#include "btydnn/data_pipeline.hpp"

namespace btydnn {

// Test-fixture regime: mean lambda 0.05/week, mean lifetime 50 weeks.
inline constexpr HyperParams kDefaultSyntheticHyper{0.5, 10.0, 0.4, 20.0};

struct SyntheticCohort {
  HyperParams hyper;
  std::vector<std::string> customer_ids;
  std::vector<IndividualParams> true_params;
  std::vector<Date> acquisition;
  TransactionLog log;
};

struct SyntheticOptions {
  HyperParams hyper = kDefaultSyntheticHyper;
  std::size_t customers = 2000;
  std::uint64_t seed = 7;
  Date start = Date::from_ymd(2000, 1, 1);
  long acquisition_window_days = 84;  // first purchases uniform over this span
  long total_days = 546;              // log covers [start, start + total_days]
};

// lambda_i ~ Gamma(r, alpha), mu_i ~ Gamma(s, beta), rates per week.
std::vector<IndividualParams> sample_population(const HyperParams& hp, std::size_t n,
                                                std::uint64_t seed);

// Day-granularity purchase log: a first purchase at acquisition, then Poisson
// repeat purchases until min(dropout, end). Customer ids are "C000001"...
TransactionLog simulate_log(const std::vector<IndividualParams>& params,
                            const std::vector<Date>& acquisition, Date end,
                            std::uint64_t seed);

// Repeat-purchase offsets (weeks after acquisition) for one customer observed
// for `horizon_weeks`.
std::vector<double> simulate_repeat_times(const IndividualParams& p,
                                          double horizon_weeks, Rng& rng);

SyntheticCohort make_synthetic_cohort(const SyntheticOptions& opt);

std::string synthetic_customer_id(std::size_t index);

}  // namespace btydnn
