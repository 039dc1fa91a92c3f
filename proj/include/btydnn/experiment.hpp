#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "btydnn/bayes.hpp"
#include "btydnn/data_pipeline.hpp"
#include "btydnn/evaluation.hpp"
#include "btydnn/network.hpp"
#include "btydnn/prediction.hpp"
#include "btydnn/synthetic.hpp"

namespace btydnn {

// ---------------------------------------------------------------------------
// Cohort preparation (ingest stage)
// ---------------------------------------------------------------------------

struct PreparedCohort {
  Date start_date;
  Date end_date;
  Date split_date;
  double holdout_weeks = 0.0;
  double train_fraction = 0.6;
  std::uint64_t split_seed = 0;
  std::vector<std::string> covariate_names;
  std::vector<CalibrationSummary> train;
  std::vector<CalibrationSummary> test;
};

// Customer split, mid-date calibration/holdout split, RFM summaries.
PreparedCohort prepare_cohort(const TransactionLog& log, double train_fraction,
                              std::uint64_t seed,
                              const std::vector<Covariate>& covariates = {});

// Writes summaries_train.csv, summaries_test.csv and cohort.json into `dir`.
void write_cohort(const PreparedCohort& c, const std::filesystem::path& dir);
PreparedCohort read_cohort(const std::filesystem::path& dir);

// Wraps a standalone test-summaries CSV (e.g. for `evaluate`).
PreparedCohort cohort_from_test_summaries(const std::filesystem::path& csv,
                                          double holdout_weeks);

// Looks up `params` for each summary by customer id.
std::vector<IndividualParams> params_for(const std::vector<CalibrationSummary>& rows,
                                         const std::vector<std::string>& ids,
                                         const std::vector<IndividualParams>& params);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class DatasetFormat { kCdnow, kCsv, kSynthetic };

struct ExperimentConfig {
  std::filesystem::path dataset;
  DatasetFormat format = DatasetFormat::kCdnow;
  SyntheticOptions synthetic;
  double train_fraction = 0.6;
  std::uint64_t seed = 42;
  ChainConfig chain;
  NetworkSpec network;
  TrainingConfig training;
  std::vector<LossKind> losses{std::begin(kAllLossKinds), std::end(kAllLossKinds)};
  RatioInterpretation ratio = RatioInterpretation::kWeightedNll;
  double threshold = 0.5;
  Rounding rounding = Rounding::kHalfAwayFromZero;
  int cap = 7;
  std::vector<Covariate> covariates;
  std::filesystem::path output_dir = "results";

  // Applies one `key = value` setting; throws on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

// Flat `key = value` file; `#` starts a comment; values may be quoted.
ExperimentConfig load_config(const std::filesystem::path& path);

// Stage seeds fanned out from the global seed.
struct StageSeeds {
  std::uint64_t split;
  std::uint64_t chain;
  std::uint64_t network;
  std::uint64_t synthetic;
};
StageSeeds stage_seeds(std::uint64_t global_seed);

// ---------------------------------------------------------------------------
// End-to-end run
// ---------------------------------------------------------------------------

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct ExperimentResult {
  PreparedCohort cohort;
  HyperParams mean_hyper;
  MetricsReport baseline;
  std::vector<MetricsReport> reports;  // one per loss kind, config order
  std::vector<StageTiming> timings;
  std::vector<std::filesystem::path> files;
};

inline constexpr const char* kBaselineModelName = "pareto_nbd";

// Three stages: MCMC labels, network training and forecasting per loss kind,
// then the metric tables. Writes every artifact plus a MANIFEST under
// cfg.output_dir; on failure the MANIFEST is marked incomplete and the error
// is rethrown tagged with the stage name.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace btydnn
