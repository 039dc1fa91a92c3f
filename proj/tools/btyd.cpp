#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "btydnn/btydnn.h"

namespace {

struct CliError {
  btyd_status status;
};

void check(btyd_status s) {
  if (s != BTYD_OK) throw CliError{s};
}

template <class T, void (*Free)(T*)>
struct Owned {
  T* p = nullptr;
  Owned() = default;
  Owned(const Owned&) = delete;
  Owned& operator=(const Owned&) = delete;
  ~Owned() { Free(p); }
  T** out() { return &p; }
  operator T*() const { return p; }
};

using Log = Owned<btyd_log, btyd_log_free>;
using Cohort = Owned<btyd_cohort, btyd_cohort_free>;
using Params = Owned<btyd_params, btyd_params_free>;
using Model = Owned<btyd_model, btyd_model_free>;
using Forecasts = Owned<btyd_forecasts, btyd_forecasts_free>;
using Report = Owned<btyd_report, btyd_report_free>;
using Config = Owned<btyd_config, btyd_config_free>;

void print_file(const std::string& path) {
  std::ifstream in(path);
  if (in) std::cout << in.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Customer-base forecasting with MCMC labels and a neural surrogate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(btyd_version()));

  // ingest
  std::string in_path, in_format = "cdnow", cohort_dir, covariates;
  double train_fraction = 0.6;
  std::uint64_t seed = 42;  // global seed; each subcommand derives its stage seed
  auto* ingest = app.add_subcommand("ingest", "Split customers and write calibration summaries");
  ingest->add_option("--input", in_path, "Transaction file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--format", in_format, "cdnow or csv")
      ->check(CLI::IsMember({"cdnow", "csv"}));
  ingest->add_option("--out", cohort_dir, "Cohort directory")->required();
  ingest->add_option("--train-fraction", train_fraction)->check(CLI::Range(0.0, 1.0));
  ingest->add_option("--seed", seed, "Global seed");
  ingest->add_option("--covariates", covariates, "Comma list: total_units,total_spend,mean_spend");

  // simulate
  btyd_synthetic_options sim;
  btyd_synthetic_defaults(&sim);
  std::string sim_out, sim_truth;
  auto* simulate = app.add_subcommand("simulate", "Draw a synthetic transaction log");
  simulate->add_option("--n", sim.customers, "Customers");
  simulate->add_option("--seed", seed, "Global seed");
  simulate->add_option("--r", sim.r);
  simulate->add_option("--alpha", sim.alpha);
  simulate->add_option("--s", sim.s);
  simulate->add_option("--beta", sim.beta);
  simulate->add_option("--out", sim_out, "Transactions CSV")->required();
  simulate->add_option("--truth", sim_truth, "CSV of true (lambda, mu)");

  // fit-mcmc
  btyd_chain_config chain;
  btyd_chain_defaults(&chain);
  std::string labels_out, trace_out;
  auto* fit = app.add_subcommand("fit-mcmc", "Posterior-mean (lambda, mu) labels");
  fit->add_option("--cohort", cohort_dir, "Cohort directory")->required();
  fit->add_option("--out", labels_out, "Labels CSV")->required();
  fit->add_option("--sweeps", chain.sweeps);
  fit->add_option("--burn-in", chain.burn_in);
  fit->add_option("--thin", chain.thin);
  fit->add_option("--seed", seed, "Global seed");
  fit->add_option("--trace", trace_out, "Hyperparameter trace CSV");

  // train-nn
  btyd_train_config tcfg;
  btyd_train_defaults(&tcfg);
  std::string labels_in, loss = "nll", ratio = "weighted_nll", model_out, history_out;
  auto* trainc = app.add_subcommand("train-nn", "Train the surrogate network");
  trainc->add_option("--cohort", cohort_dir)->required();
  trainc->add_option("--labels", labels_in)->required()->check(CLI::ExistingFile);
  trainc->add_option("--loss", loss, "mse|mae|nll|nll_mse|nll_mae|ratio|ratio_mse|ratio_mae");
  trainc->add_option("--ratio", ratio, "weighted_nll|abs_log_ratio");
  trainc->add_option("--seed", seed, "Global seed");
  trainc->add_option("--epochs", tcfg.epochs);
  trainc->add_option("--patience", tcfg.patience);
  trainc->add_option("--batch-size", tcfg.batch_size);
  trainc->add_option("--learning-rate", tcfg.learning_rate);
  trainc->add_option("--validation-fraction", tcfg.validation_fraction);
  trainc->add_option("--hidden-layers", tcfg.hidden_layers);
  trainc->add_option("--hidden-width", tcfg.hidden_width);
  trainc->add_option("--dropout", tcfg.dropout);
  trainc->add_option("--out", model_out, "Model file")->required();
  trainc->add_option("--history", history_out, "Loss history CSV");

  // predict
  std::string model_in, forecast_out, rounding = "nearest", params_out;
  double threshold = 0.5;
  auto* predict = app.add_subcommand("predict", "Forecast test customers");
  predict->add_option("--cohort", cohort_dir)->required();
  auto* by_model = predict->add_option("--model", model_in)->check(CLI::ExistingFile);
  auto* by_labels = predict->add_option("--labels", labels_in)->check(CLI::ExistingFile);
  by_model->excludes(by_labels);
  predict->add_option("--threshold", threshold)->check(CLI::Range(0.0, 1.0));
  predict->add_option("--rounding", rounding)->check(CLI::IsMember({"nearest", "floor"}));
  predict->add_option("--out", forecast_out, "Forecast CSV")->required();
  predict->add_option("--params-out", params_out, "Predicted (lambda, mu) CSV");

  // evaluate
  std::string actual_csv, forecast_in, baseline_in, name = "model", report_out;
  double holdout_weeks = 0.0;
  int cap = 7;
  auto* evaluate = app.add_subcommand("evaluate", "Score forecasts against holdout truth");
  auto* ev_cohort = evaluate->add_option("--cohort", cohort_dir);
  auto* ev_actual = evaluate->add_option("--actual", actual_csv, "Test summaries CSV")
                        ->check(CLI::ExistingFile);
  ev_cohort->excludes(ev_actual);
  evaluate->add_option("--holdout-weeks", holdout_weeks, "Needed with --actual");
  evaluate->add_option("--forecast", forecast_in)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--baseline", baseline_in)->check(CLI::ExistingFile);
  evaluate->add_option("--cap", cap)->check(CLI::PositiveNumber);
  evaluate->add_option("--name", name);
  evaluate->add_option("--out", report_out, "Metrics JSON");

  // run
  std::string config_path, out_dir, loss_list;
  std::optional<std::uint64_t> run_seed;
  std::optional<double> run_threshold;
  std::optional<int> run_cap;
  std::string run_rounding;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Full experiment from a config file");
  run->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  run->add_option("--seed", run_seed);
  run->add_option("--loss", loss_list, "Comma list of loss kinds");
  run->add_option("--threshold", run_threshold);
  run->add_option("--rounding", run_rounding);
  run->add_option("--cap", run_cap);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--set", overrides, "Extra key=value settings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  btyd_stage_seeds stage;
  btyd_derive_stage_seeds(seed, &stage);
  sim.seed = stage.synthetic;
  chain.seed = stage.chain;
  tcfg.seed = stage.network;

  try {
    if (*ingest) {
      Log log;
      check(btyd_log_load(in_path.c_str(), in_format.c_str(), log.out()));
      Cohort c;
      check(btyd_cohort_prepare(log, train_fraction, stage.split,
                                covariates.empty() ? nullptr : covariates.c_str(), c.out()));
      check(btyd_cohort_save(c, cohort_dir.c_str()));
      btyd_log_info li;
      btyd_cohort_info ci;
      check(btyd_log_info_get(log, &li));
      check(btyd_cohort_info_get(c, &ci));
      std::printf("%zu records, %zu customers, %s to %s\n", li.records, li.customers,
                  li.start_date, li.end_date);
      std::printf("split %s, holdout %.4g weeks, train %zu, test %zu\n", ci.split_date,
                  ci.holdout_weeks, ci.train_customers, ci.test_customers);
    } else if (*simulate) {
      Log log;
      Params truth;
      check(btyd_simulate(&sim, log.out(), sim_truth.empty() ? nullptr : truth.out()));
      check(btyd_log_save_csv(log, sim_out.c_str()));
      if (!sim_truth.empty()) check(btyd_params_save(truth, sim_truth.c_str()));
      btyd_log_info li;
      check(btyd_log_info_get(log, &li));
      std::printf("%zu records, %zu customers\n", li.records, li.customers);
    } else if (*fit) {
      Cohort c;
      check(btyd_cohort_load(cohort_dir.c_str(), c.out()));
      Params labels;
      btyd_hyper h;
      check(btyd_fit_mcmc(c, &chain, labels.out(), &h,
                          trace_out.empty() ? nullptr : trace_out.c_str()));
      check(btyd_params_save(labels, labels_out.c_str()));
      std::printf("posterior mean r=%.4g alpha=%.4g s=%.4g beta=%.4g\n", h.r, h.alpha, h.s,
                  h.beta);
    } else if (*trainc) {
      Cohort c;
      check(btyd_cohort_load(cohort_dir.c_str(), c.out()));
      Params labels;
      check(btyd_params_load(labels_in.c_str(), labels.out()));
      Model m;
      check(btyd_train(c, labels, &tcfg, loss.c_str(), ratio.c_str(), m.out()));
      check(btyd_model_save(m, model_out.c_str()));
      if (!history_out.empty()) check(btyd_model_save_history(m, history_out.c_str()));
    } else if (*predict) {
      if (model_in.empty() && labels_in.empty()) {
        std::cerr << "predict: one of --model or --labels is required\n";
        return 2;
      }
      Cohort c;
      check(btyd_cohort_load(cohort_dir.c_str(), c.out()));
      Params p;
      if (!model_in.empty()) {
        Model m;
        check(btyd_model_load(model_in.c_str(), m.out()));
        check(btyd_model_predict(m, c, p.out()));
      } else {
        check(btyd_params_load(labels_in.c_str(), p.out()));
      }
      if (!params_out.empty()) check(btyd_params_save(p, params_out.c_str()));
      Forecasts f;
      check(btyd_forecast(c, p, threshold, rounding.c_str(), f.out()));
      check(btyd_forecasts_save(f, forecast_out.c_str()));
    } else if (*evaluate) {
      Cohort c;
      if (!actual_csv.empty()) {
        if (holdout_weeks <= 0.0) {
          std::cerr << "evaluate: --actual needs --holdout-weeks\n";
          return 2;
        }
        check(btyd_cohort_from_summaries(actual_csv.c_str(), holdout_weeks, c.out()));
      } else if (!cohort_dir.empty()) {
        check(btyd_cohort_load(cohort_dir.c_str(), c.out()));
      } else {
        std::cerr << "evaluate: one of --cohort or --actual is required\n";
        return 2;
      }
      Forecasts f, b;
      check(btyd_forecasts_load(forecast_in.c_str(), f.out()));
      if (!baseline_in.empty()) check(btyd_forecasts_load(baseline_in.c_str(), b.out()));
      Report r;
      check(btyd_evaluate(c, f, baseline_in.empty() ? nullptr : b.p, cap, name.c_str(),
                          r.out()));
      if (!report_out.empty()) check(btyd_report_save_json(r, report_out.c_str()));
      std::printf("%s\n", btyd_report_json(r));
    } else if (*run) {
      Config cfg;
      check(btyd_config_load(config_path.c_str(), cfg.out()));
      auto set = [&](const std::string& k, const std::string& v) {
        check(btyd_config_set(cfg, k.c_str(), v.c_str()));
      };
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          std::cerr << "run: --set expects key=value, got '" << kv << "'\n";
          return 2;
        }
        set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (run_seed) set("seed", std::to_string(*run_seed));
      if (!loss_list.empty()) set("losses", loss_list);
      if (run_threshold) set("threshold", std::to_string(*run_threshold));
      if (!run_rounding.empty()) set("rounding", run_rounding);
      if (run_cap) set("cap", std::to_string(*run_cap));
      if (!out_dir.empty()) set("output_dir", out_dir);
      check(btyd_run_experiment(cfg));
      const std::string dir = btyd_config_output_dir(cfg);
      print_file(dir + "/metrics_table.csv");
    }
  } catch (const CliError& e) {
    std::cerr << "error (" << btyd_status_name(e.status) << "): " << btyd_last_error() << '\n';
    return 1;
  }
  return 0;
}
