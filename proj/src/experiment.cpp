#include "btydnn/experiment.hpp"

#include <chrono>
#include <iostream>
#include <unordered_map>

#include "json.hpp"

#include "btydnn/error.hpp"
#include "text_util.hpp"

namespace btydnn {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Cohort preparation
// ---------------------------------------------------------------------------

PreparedCohort prepare_cohort(const TransactionLog& log, double train_fraction,
                              std::uint64_t seed, const std::vector<Covariate>& covariates) {
  CohortSplit split = split_customers(log, train_fraction, seed);
  set_split_date(split, log, mid_date(log));
  PreparedCohort c;
  c.start_date = log.start_date;
  c.end_date = log.end_date;
  c.split_date = split.split_date;
  c.holdout_weeks = split.holdout_length_weeks;
  c.train_fraction = train_fraction;
  c.split_seed = seed;
  for (auto cov : covariates) c.covariate_names.push_back(covariate_name(cov));
  c.train = summarize_rfm(log, split, split.train_ids, covariates);
  c.test = summarize_rfm(log, split, split.test_ids, covariates);
  return c;
}

void write_cohort(const PreparedCohort& c, const fs::path& dir) {
  fs::create_directories(dir);
  write_summaries_csv(c.train, c.covariate_names, dir / "summaries_train.csv");
  write_summaries_csv(c.test, c.covariate_names, dir / "summaries_test.csv");
  nlohmann::ordered_json j;
  j["start_date"] = c.start_date.iso();
  j["end_date"] = c.end_date.iso();
  j["split_date"] = c.split_date.iso();
  j["holdout_weeks"] = c.holdout_weeks;
  j["train_fraction"] = c.train_fraction;
  j["split_seed"] = c.split_seed;
  j["covariates"] = c.covariate_names;
  j["train_customers"] = c.train.size();
  j["test_customers"] = c.test.size();
  auto out = detail::open_out(dir / "cohort.json");
  out << j.dump(2) << '\n';
}

PreparedCohort read_cohort(const fs::path& dir) {
  const fs::path meta = dir / "cohort.json";
  require(fs::exists(meta), ErrorKind::kIo,
          "missing upstream artifact '" + meta.string() + "' (run `ingest` first)");
  nlohmann::json j;
  try {
    auto in = detail::open_in(meta);
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, meta.string() + ": " + e.what());
  }
  PreparedCohort c;
  try {
    c.start_date = Date::parse(j.at("start_date").get<std::string>());
    c.end_date = Date::parse(j.at("end_date").get<std::string>());
    c.split_date = Date::parse(j.at("split_date").get<std::string>());
    c.holdout_weeks = j.at("holdout_weeks").get<double>();
    c.train_fraction = j.at("train_fraction").get<double>();
    c.split_seed = j.at("split_seed").get<std::uint64_t>();
    c.covariate_names = j.at("covariates").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, meta.string() + ": " + e.what());
  }
  for (const char* name : {"summaries_train.csv", "summaries_test.csv"}) {
    require(fs::exists(dir / name), ErrorKind::kIo,
            "missing upstream artifact '" + (dir / name).string() + "'");
  }
  std::vector<std::string> names;
  c.train = read_summaries_csv(dir / "summaries_train.csv", &names);
  require(names == c.covariate_names, ErrorKind::kParse,
          "covariate columns disagree with cohort.json");
  c.test = read_summaries_csv(dir / "summaries_test.csv", &names);
  require(names == c.covariate_names, ErrorKind::kParse,
          "covariate columns disagree with cohort.json");
  return c;
}

PreparedCohort cohort_from_test_summaries(const fs::path& csv, double holdout_weeks) {
  require(fs::exists(csv), ErrorKind::kIo, "missing summaries file '" + csv.string() + "'");
  PreparedCohort c;
  c.holdout_weeks = holdout_weeks;
  c.test = read_summaries_csv(csv, &c.covariate_names);
  return c;
}

std::vector<IndividualParams> params_for(const std::vector<CalibrationSummary>& rows,
                                         const std::vector<std::string>& ids,
                                         const std::vector<IndividualParams>& params) {
  require(ids.size() == params.size(), ErrorKind::kInvalidArgument,
          "parameter id/value count mismatch");
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
  std::vector<IndividualParams> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    auto it = index.find(r.customer_id);
    require(it != index.end(), ErrorKind::kInvalidArgument,
            "no parameters for customer " + r.customer_id);
    out.push_back(params[it->second]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

double to_double(const std::string& key, const std::string& v) {
  double d = 0.0;
  require(detail::try_double(v, d), ErrorKind::kInvalidArgument,
          "config '" + key + "': expected a number, got '" + v + "'");
  return d;
}

long to_long(const std::string& key, const std::string& v) {
  long n = 0;
  require(detail::try_long(v, n), ErrorKind::kInvalidArgument,
          "config '" + key + "': expected an integer, got '" + v + "'");
  return n;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t n = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  require(ec == std::errc() && p == v.data() + v.size(), ErrorKind::kInvalidArgument,
          "config '" + key + "': expected an unsigned integer, got '" + v + "'");
  return n;
}

std::vector<std::string> list_of(const std::string& v) {
  std::vector<std::string> out;
  for (auto item : detail::split(v, ',')) {
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "dataset") {
    dataset = v;
  } else if (key == "format") {
    if (v == "cdnow") format = DatasetFormat::kCdnow;
    else if (v == "csv") format = DatasetFormat::kCsv;
    else if (v == "synthetic") format = DatasetFormat::kSynthetic;
    else fail(ErrorKind::kInvalidArgument, "config 'format': unknown format '" + v + "'");
  } else if (key == "synthetic_customers") {
    synthetic.customers = std::size_t(to_long(key, v));
  } else if (key == "synthetic_r") {
    synthetic.hyper.r = to_double(key, v);
  } else if (key == "synthetic_alpha") {
    synthetic.hyper.alpha = to_double(key, v);
  } else if (key == "synthetic_s") {
    synthetic.hyper.s = to_double(key, v);
  } else if (key == "synthetic_beta") {
    synthetic.hyper.beta = to_double(key, v);
  } else if (key == "synthetic_window_days") {
    synthetic.acquisition_window_days = to_long(key, v);
  } else if (key == "synthetic_total_days") {
    synthetic.total_days = to_long(key, v);
  } else if (key == "train_fraction") {
    train_fraction = to_double(key, v);
  } else if (key == "seed") {
    seed = to_u64(key, v);
  } else if (key == "chain_sweeps") {
    chain.sweeps = int(to_long(key, v));
  } else if (key == "chain_burn_in") {
    chain.burn_in = int(to_long(key, v));
  } else if (key == "chain_thin") {
    chain.thin = int(to_long(key, v));
  } else if (key == "hyperprior_a0") {
    chain.a0 = to_double(key, v);
  } else if (key == "hyperprior_b0") {
    chain.b0 = to_double(key, v);
  } else if (key == "hidden_layers") {
    network.hidden_layers = int(to_long(key, v));
  } else if (key == "hidden_width") {
    network.hidden_width = int(to_long(key, v));
  } else if (key == "dropout") {
    network.dropout_p = to_double(key, v);
  } else if (key == "epochs") {
    training.epochs = int(to_long(key, v));
  } else if (key == "batch_size") {
    training.batch_size = int(to_long(key, v));
  } else if (key == "learning_rate") {
    training.learning_rate = to_double(key, v);
  } else if (key == "adam_beta1") {
    training.adam_beta1 = to_double(key, v);
  } else if (key == "adam_beta2") {
    training.adam_beta2 = to_double(key, v);
  } else if (key == "adam_eps") {
    training.adam_eps = to_double(key, v);
  } else if (key == "patience") {
    training.early_stop_patience = int(to_long(key, v));
  } else if (key == "validation_fraction") {
    training.validation_fraction = to_double(key, v);
  } else if (key == "losses" || key == "loss") {
    losses.clear();
    for (const auto& name : list_of(v)) losses.push_back(parse_loss_kind(name));
  } else if (key == "ratio_interpretation") {
    ratio = parse_ratio_interpretation(v);
  } else if (key == "threshold") {
    threshold = to_double(key, v);
  } else if (key == "rounding") {
    rounding = parse_rounding(v);
  } else if (key == "cap") {
    cap = int(to_long(key, v));
  } else if (key == "covariates") {
    covariates.clear();
    for (const auto& name : list_of(v)) covariates.push_back(parse_covariate(name));
  } else if (key == "out" || key == "output_dir") {
    output_dir = v;
  } else {
    fail(ErrorKind::kInvalidArgument, "unknown config key '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  if (format != DatasetFormat::kSynthetic) {
    require(!dataset.empty() && fs::exists(dataset), ErrorKind::kIo,
            "dataset '" + dataset.string() + "' does not exist");
  } else {
    require(synthetic.customers >= 2, ErrorKind::kInvalidArgument,
            "synthetic cohort needs at least 2 customers");
  }
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::kInvalidArgument,
          "train_fraction must lie in (0, 1)");
  require(!losses.empty(), ErrorKind::kInvalidArgument, "at least one loss kind is required");
  require(threshold >= 0.0 && threshold <= 1.0, ErrorKind::kInvalidArgument,
          "threshold must lie in [0, 1]");
  require(cap > 0, ErrorKind::kInvalidArgument, "cap must be positive");
  chain.validate();
  network.validate();
  training.validate();
}

ExperimentConfig load_config(const fs::path& path) {
  auto in = detail::open_in(path);
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    bool quoted = false;
    std::size_t cut = std::string_view::npos;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (body[i] == '"') quoted = !quoted;
      if (body[i] == '#' && !quoted) {
        cut = i;
        break;
      }
    }
    body = detail::trim(body.substr(0, cut));
    if (body.empty() || body.front() == '[') continue;  // TOML-style table headers
    const auto eq = body.find('=');
    require(eq != std::string_view::npos, ErrorKind::kParse,
            detail::where(path, line_no) + ": expected key = value");
    std::string key(detail::trim(body.substr(0, eq)));
    std::string_view value = detail::trim(body.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    try {
      cfg.set(key, std::string(value));
    } catch (const Error& e) {
      fail(e.kind(), detail::where(path, line_no) + ": " + e.what());
    }
  }
  // Relative dataset paths are resolved against the config file's directory.
  if (!cfg.dataset.empty() && cfg.dataset.is_relative() && !fs::exists(cfg.dataset)) {
    const fs::path alt = path.parent_path() / cfg.dataset;
    if (fs::exists(alt)) cfg.dataset = alt;
  }
  return cfg;
}

StageSeeds stage_seeds(std::uint64_t global_seed) {
  return {derive_seed(global_seed, 1), derive_seed(global_seed, 2),
          derive_seed(global_seed, 3), derive_seed(global_seed, 4)};
}

// ---------------------------------------------------------------------------
// Run
// ---------------------------------------------------------------------------

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_manifest(const fs::path& dir, const std::vector<fs::path>& files,
                    const std::string& status, const std::string& failed_stage,
                    const std::string& error) {
  auto out = detail::open_out(dir / "MANIFEST");
  out << "status " << status << '\n';
  if (!failed_stage.empty()) {
    out << "failed_stage " << failed_stage << '\n';
    out << "error " << error << '\n';
  }
  for (const auto& f : files) out << "file " << f.filename().string() << '\n';
}

void write_timing_csv(const std::vector<StageTiming>& timings, const fs::path& path) {
  auto out = detail::open_out(path);
  out << "stage,seconds\n";
  for (const auto& t : timings) out << t.stage << ',' << detail::fmt_fixed(t.seconds, 3) << '\n';
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const StageSeeds seeds = stage_seeds(cfg.seed);

  ExperimentResult res;
  std::string stage = "ingest";
  auto note = [&](const fs::path& p) { res.files.push_back(p); };

  try {
    // Stage 1: data preparation and MCMC labels.
    Stopwatch ingest_clock;
    TransactionLog log;
    switch (cfg.format) {
      case DatasetFormat::kCdnow: log = ingest_cdnow(cfg.dataset); break;
      case DatasetFormat::kCsv: log = ingest_csv(cfg.dataset); break;
      case DatasetFormat::kSynthetic: {
        SyntheticOptions opt = cfg.synthetic;
        opt.seed = seeds.synthetic;
        const auto cohort = make_synthetic_cohort(opt);
        write_transactions_csv(cohort.log, dir / "transactions.csv");
        note(dir / "transactions.csv");
        // Same bytes `ingest` would see, so run == simulate | ingest | ...
        log = ingest_csv(dir / "transactions.csv");
        write_labels_csv(cohort.customer_ids, cohort.true_params, dir / "truth.csv");
        note(dir / "truth.csv");
        break;
      }
    }
    res.cohort = prepare_cohort(log, cfg.train_fraction, seeds.split, cfg.covariates);
    write_cohort(res.cohort, dir);
    for (const char* f : {"summaries_train.csv", "summaries_test.csv", "cohort.json"}) {
      note(dir / f);
    }
    const double ingest_s = ingest_clock.seconds();

    stage = "fit-mcmc";
    Stopwatch mcmc_clock;
    ChainConfig chain = cfg.chain;
    chain.seed = seeds.chain;
    chain.keep_traces = true;
    std::vector<CalibrationSummary> everyone = res.cohort.train;
    everyone.insert(everyone.end(), res.cohort.test.begin(), res.cohort.test.end());
    const PosteriorSummary post = run_chain(everyone, chain);
    res.mean_hyper = post.mean_hyper;
    write_labels_csv(post.customer_ids, post.mean_params, dir / "labels.csv");
    note(dir / "labels.csv");
    write_trace_csv(post, dir / "trace.csv");
    note(dir / "trace.csv");
    const double mcmc_s = mcmc_clock.seconds();

    const auto train_labels = params_for(res.cohort.train, post.customer_ids, post.mean_params);
    const auto test_labels = params_for(res.cohort.test, post.customer_ids, post.mean_params);
    const auto baseline_fc = forecast_all(res.cohort.test, test_labels, res.cohort.holdout_weeks,
                                          cfg.threshold, cfg.rounding);
    write_forecast_csv(baseline_fc, dir / "forecast_pareto_nbd.csv");
    note(dir / "forecast_pareto_nbd.csv");

    // Stage 2: one network per loss kind.
    stage = "train-nn";
    Stopwatch nn_clock;
    TrainingConfig training = cfg.training;
    training.seed = seeds.network;
    std::vector<std::vector<CustomerForecast>> nn_forecasts;
    for (auto kind : cfg.losses) {
      const std::string name = loss_kind_name(kind);
      const TrainedModel model = train(res.cohort.train, train_labels, cfg.network, training,
                                       {kind, cfg.ratio}, res.cohort.covariate_names);
      save_model(model, dir / ("model_" + name + ".txt"));
      note(dir / ("model_" + name + ".txt"));
      write_history_csv(model.history, dir / ("history_" + name + ".csv"));
      note(dir / ("history_" + name + ".csv"));
      const auto predicted = predict_params(res.cohort.test, model);
      nn_forecasts.push_back(forecast_all(res.cohort.test, predicted, res.cohort.holdout_weeks,
                                          cfg.threshold, cfg.rounding));
      write_forecast_csv(nn_forecasts.back(), dir / ("forecast_" + name + ".csv"));
      note(dir / ("forecast_" + name + ".csv"));
    }
    const double nn_s = nn_clock.seconds();

    // Stage 3: metrics.
    stage = "evaluate";
    Stopwatch eval_clock;
    res.baseline = evaluate(kBaselineModelName, baseline_fc, res.cohort.test, cfg.cap);
    write_report_json(res.baseline, dir / "metrics_pareto_nbd.json");
    note(dir / "metrics_pareto_nbd.json");
    for (std::size_t k = 0; k < cfg.losses.size(); ++k) {
      const std::string name = loss_kind_name(cfg.losses[k]);
      res.reports.push_back(
          evaluate(name, nn_forecasts[k], res.cohort.test, cfg.cap, &baseline_fc));
      write_report_json(res.reports.back(), dir / ("metrics_" + name + ".json"));
      note(dir / ("metrics_" + name + ".json"));
    }
    std::vector<MetricsReport> table{res.baseline};
    table.insert(table.end(), res.reports.begin(), res.reports.end());
    write_metrics_table_csv(table, dir / "metrics_table.csv");
    note(dir / "metrics_table.csv");
    write_histogram_csv(actual_histogram(res.cohort.test, cfg.cap), table,
                        dir / "histogram.csv");
    note(dir / "histogram.csv");
    if (res.reports.size() >= 3) {
      write_correlation_csv(metric_correlations(res.reports), dir / "correlations.csv");
      note(dir / "correlations.csv");
    }
    const double eval_s = eval_clock.seconds();

    res.timings = {{"ingest", ingest_s},
                   {"fit-mcmc", mcmc_s},
                   {"train-nn+predict", nn_s},
                   {"evaluate", eval_s}};
    write_timing_csv(res.timings, dir / "timing.csv");
    note(dir / "timing.csv");
    write_manifest(dir, res.files, "complete", "", "");
  } catch (const std::exception& e) {
    write_manifest(dir, res.files, "incomplete", stage, e.what());
    const ErrorKind kind =
        dynamic_cast<const Error*>(&e) ? static_cast<const Error&>(e).kind() : ErrorKind::kState;
    fail(kind, "[" + stage + "] " + e.what());
  }
  return res;
}

}  // namespace btydnn
