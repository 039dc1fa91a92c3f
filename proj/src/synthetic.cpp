#include "btydnn/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "btydnn/error.hpp"

namespace btydnn {

namespace {
// Stream tags so the population, acquisition and event streams never overlap.
constexpr std::uint64_t kTagPopulation = 1;
constexpr std::uint64_t kTagAcquisition = 2;
constexpr std::uint64_t kTagEvents = 3;
}  // namespace

std::string synthetic_customer_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "C%06zu", index + 1);
  return buf;
}

std::vector<IndividualParams> sample_population(const HyperParams& hp, std::size_t n,
                                                std::uint64_t seed) {
  require(n >= 1, ErrorKind::kInvalidArgument, "population size must be positive");
  require(hp.r > 0 && hp.alpha > 0 && hp.s > 0 && hp.beta > 0,
          ErrorKind::kInvalidArgument, "hyperparameters must be positive");
  std::vector<IndividualParams> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, kTagPopulation, i));
    out[i].lambda = rng.gamma(hp.r, hp.alpha);
    out[i].mu = rng.gamma(hp.s, hp.beta);
  }
  return out;
}

std::vector<double> simulate_repeat_times(const IndividualParams& p,
                                          double horizon_weeks, Rng& rng) {
  std::vector<double> times;
  if (!(p.lambda > 0.0)) return times;
  double lifetime = std::isinf(p.mu) ? 0.0 : rng.exponential(p.mu);
  const double window = std::min(lifetime, horizon_weeks);
  double t = rng.exponential(p.lambda);
  while (t < window) {
    times.push_back(t);
    t += rng.exponential(p.lambda);
  }
  return times;
}

TransactionLog simulate_log(const std::vector<IndividualParams>& params,
                            const std::vector<Date>& acquisition, Date end,
                            std::uint64_t seed) {
  require(params.size() == acquisition.size() && !params.empty(),
          ErrorKind::kInvalidArgument, "need one acquisition date per customer");
  std::vector<TransactionRecord> records;
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(acquisition[i] <= end, ErrorKind::kInvalidArgument,
            "acquisition after the end of the log");
    const std::string id = synthetic_customer_id(i);
    Rng rng(derive_seed(seed, kTagEvents, i));
    const double horizon = weeks_between(acquisition[i], end);
    records.push_back({id, acquisition[i], 10.0 + 5.0 * rng.uniform(), 1L});
    for (double t : simulate_repeat_times(params[i], horizon, rng)) {
      const long day = static_cast<long>(std::floor(t * kDaysPerWeek));
      const long units = 1 + static_cast<long>(rng.below(3));
      records.push_back({id, acquisition[i].plus_days(day), 10.0 + 5.0 * rng.uniform(),
                         units});
    }
  }
  TransactionLog log = make_log(std::move(records));
  if (log.end_date < end) log.end_date = end;
  if (acquisition.front() < log.start_date) log.start_date = acquisition.front();
  return log;
}

SyntheticCohort make_synthetic_cohort(const SyntheticOptions& opt) {
  require(opt.acquisition_window_days >= 0 &&
              opt.total_days > opt.acquisition_window_days,
          ErrorKind::kInvalidArgument, "acquisition window must end before the log");
  SyntheticCohort c;
  c.hyper = opt.hyper;
  c.true_params = sample_population(opt.hyper, opt.customers, opt.seed);
  c.acquisition.reserve(opt.customers);
  for (std::size_t i = 0; i < opt.customers; ++i) {
    Rng rng(derive_seed(opt.seed, kTagAcquisition, i));
    c.acquisition.push_back(opt.start.plus_days(
        long(rng.below(std::uint64_t(opt.acquisition_window_days) + 1))));
    c.customer_ids.push_back(synthetic_customer_id(i));
  }
  const Date end = opt.start.plus_days(opt.total_days);
  c.log = simulate_log(c.true_params, c.acquisition, end, opt.seed);
  c.log.start_date = opt.start;
  return c;
}

}  // namespace btydnn
