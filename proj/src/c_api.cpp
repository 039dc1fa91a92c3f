#include "btydnn/btydnn.h"

#include <cstring>
#include <new>
#include <string>

#include "btydnn/error.hpp"
#include "btydnn/experiment.hpp"
#include "text_util.hpp"

using namespace btydnn;

struct btyd_log {
  TransactionLog log;
};
struct btyd_cohort {
  PreparedCohort c;
};
struct btyd_params {
  std::vector<std::string> ids;
  std::vector<IndividualParams> values;
};
struct btyd_model {
  TrainedModel m;
};
struct btyd_forecasts {
  std::vector<CustomerForecast> f;
};
struct btyd_report {
  MetricsReport r;
  std::string json;
};
struct btyd_config {
  ExperimentConfig cfg;
};

namespace {

thread_local std::string g_last_error;

btyd_status code_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidArgument: return BTYD_E_INVALID_ARGUMENT;
    case ErrorKind::kIo: return BTYD_E_IO;
    case ErrorKind::kParse: return BTYD_E_PARSE;
    case ErrorKind::kDomain: return BTYD_E_DOMAIN;
    case ErrorKind::kState: return BTYD_E_STATE;
  }
  return BTYD_E_INTERNAL;
}

template <class F>
btyd_status guard(F&& body) {
  g_last_error.clear();
  try {
    body();
    return BTYD_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return code_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return BTYD_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BTYD_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return BTYD_E_INTERNAL;
  }
}

template <class... Ptrs>
void need(const Ptrs*... ptrs) {
  require(((ptrs != nullptr) && ...), ErrorKind::kInvalidArgument, "null argument");
}

void copy_date(char (&dst)[11], const Date& d) {
  const std::string s = d.iso();
  std::memset(dst, 0, sizeof dst);
  std::memcpy(dst, s.data(), std::min(s.size(), sizeof dst - 1));
}

std::vector<Covariate> parse_covariates(const char* list) {
  std::vector<Covariate> out;
  if (!list) return out;
  for (auto name : detail::split(list, ',')) {
    name = detail::trim(name);
    if (!name.empty()) out.push_back(parse_covariate(std::string(name)));
  }
  return out;
}

}  // namespace

extern "C" {

const char* btyd_version(void) { return "1.0.0"; }

const char* btyd_status_name(btyd_status s) {
  switch (s) {
    case BTYD_OK: return "ok";
    case BTYD_E_INVALID_ARGUMENT: return "invalid argument";
    case BTYD_E_IO: return "i/o error";
    case BTYD_E_PARSE: return "parse error";
    case BTYD_E_DOMAIN: return "domain error";
    case BTYD_E_STATE: return "invalid state";
    case BTYD_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* btyd_last_error(void) { return g_last_error.c_str(); }

void btyd_derive_stage_seeds(uint64_t global_seed, btyd_stage_seeds* out) {
  if (!out) return;
  const StageSeeds s = stage_seeds(global_seed);
  *out = {s.split, s.chain, s.network, s.synthetic};
}

// ---- logs

btyd_status btyd_log_load(const char* path, const char* format, btyd_log** out) {
  return guard([&] {
    need(path, format, out);
    const std::string fmt = format;
    auto h = std::make_unique<btyd_log>();
    if (fmt == "cdnow") h->log = ingest_cdnow(path);
    else if (fmt == "csv") h->log = ingest_csv(path);
    else fail(ErrorKind::kInvalidArgument, "unknown log format '" + fmt + "'");
    *out = h.release();
  });
}

btyd_status btyd_log_save_csv(const btyd_log* log, const char* path) {
  return guard([&] {
    need(log, path);
    write_transactions_csv(log->log, path);
  });
}

btyd_status btyd_log_info_get(const btyd_log* log, btyd_log_info* out) {
  return guard([&] {
    need(log, out);
    out->records = log->log.records.size();
    out->customers = log->log.customer_count();
    out->has_units = log->log.has_units() ? 1 : 0;
    copy_date(out->start_date, log->log.start_date);
    copy_date(out->end_date, log->log.end_date);
  });
}

void btyd_log_free(btyd_log* log) { delete log; }

void btyd_synthetic_defaults(btyd_synthetic_options* opt) {
  if (!opt) return;
  const SyntheticOptions d;
  opt->customers = d.customers;
  opt->seed = d.seed;
  opt->r = d.hyper.r;
  opt->alpha = d.hyper.alpha;
  opt->s = d.hyper.s;
  opt->beta = d.hyper.beta;
  opt->acquisition_window_days = d.acquisition_window_days;
  opt->total_days = d.total_days;
}

btyd_status btyd_simulate(const btyd_synthetic_options* opt, btyd_log** log,
                          btyd_params** truth) {
  return guard([&] {
    need(opt, log);
    SyntheticOptions o;
    o.customers = opt->customers;
    o.seed = opt->seed;
    o.hyper = {opt->r, opt->alpha, opt->s, opt->beta};
    o.acquisition_window_days = opt->acquisition_window_days;
    o.total_days = opt->total_days;
    SyntheticCohort sc = make_synthetic_cohort(o);
    auto lh = std::make_unique<btyd_log>();
    lh->log = std::move(sc.log);
    if (truth) {
      auto th = std::make_unique<btyd_params>();
      th->ids = std::move(sc.customer_ids);
      th->values = std::move(sc.true_params);
      *truth = th.release();
    }
    *log = lh.release();
  });
}

// ---- cohorts

btyd_status btyd_cohort_prepare(const btyd_log* log, double train_fraction, uint64_t seed,
                                const char* covariates, btyd_cohort** out) {
  return guard([&] {
    need(log, out);
    auto h = std::make_unique<btyd_cohort>();
    h->c = prepare_cohort(log->log, train_fraction, seed, parse_covariates(covariates));
    *out = h.release();
  });
}

btyd_status btyd_cohort_save(const btyd_cohort* c, const char* dir) {
  return guard([&] {
    need(c, dir);
    write_cohort(c->c, dir);
  });
}

btyd_status btyd_cohort_load(const char* dir, btyd_cohort** out) {
  return guard([&] {
    need(dir, out);
    auto h = std::make_unique<btyd_cohort>();
    h->c = read_cohort(dir);
    *out = h.release();
  });
}

btyd_status btyd_cohort_from_summaries(const char* csv, double holdout_weeks,
                                       btyd_cohort** out) {
  return guard([&] {
    need(csv, out);
    require(holdout_weeks > 0.0, ErrorKind::kInvalidArgument,
            "holdout length must be positive");
    auto h = std::make_unique<btyd_cohort>();
    h->c = cohort_from_test_summaries(csv, holdout_weeks);
    *out = h.release();
  });
}

btyd_status btyd_cohort_info_get(const btyd_cohort* c, btyd_cohort_info* out) {
  return guard([&] {
    need(c, out);
    out->train_customers = c->c.train.size();
    out->test_customers = c->c.test.size();
    out->holdout_weeks = c->c.holdout_weeks;
    copy_date(out->split_date, c->c.split_date);
  });
}

void btyd_cohort_free(btyd_cohort* c) { delete c; }

// ---- MCMC

void btyd_chain_defaults(btyd_chain_config* cfg) {
  if (!cfg) return;
  const ChainConfig d;
  cfg->sweeps = d.sweeps;
  cfg->burn_in = d.burn_in;
  cfg->thin = d.thin;
  cfg->seed = d.seed;
  cfg->a0 = d.a0;
  cfg->b0 = d.b0;
}

btyd_status btyd_fit_mcmc(const btyd_cohort* c, const btyd_chain_config* cfg,
                          btyd_params** labels, btyd_hyper* mean_hyper,
                          const char* trace_path) {
  return guard([&] {
    need(c, cfg, labels);
    ChainConfig chain;
    chain.sweeps = cfg->sweeps;
    chain.burn_in = cfg->burn_in;
    chain.thin = cfg->thin;
    chain.seed = cfg->seed;
    chain.a0 = cfg->a0;
    chain.b0 = cfg->b0;
    chain.keep_traces = trace_path != nullptr;
    std::vector<CalibrationSummary> rows = c->c.train;
    rows.insert(rows.end(), c->c.test.begin(), c->c.test.end());
    PosteriorSummary post = run_chain(rows, chain);
    if (trace_path) write_trace_csv(post, trace_path);
    if (mean_hyper) {
      *mean_hyper = {post.mean_hyper.r, post.mean_hyper.alpha, post.mean_hyper.s,
                     post.mean_hyper.beta};
    }
    auto h = std::make_unique<btyd_params>();
    h->ids = std::move(post.customer_ids);
    h->values = std::move(post.mean_params);
    *labels = h.release();
  });
}

btyd_status btyd_params_save(const btyd_params* p, const char* path) {
  return guard([&] {
    need(p, path);
    write_labels_csv(p->ids, p->values, path);
  });
}

btyd_status btyd_params_load(const char* path, btyd_params** out) {
  return guard([&] {
    need(path, out);
    auto h = std::make_unique<btyd_params>();
    read_labels_csv(path, h->ids, h->values);
    *out = h.release();
  });
}

size_t btyd_params_count(const btyd_params* p) { return p ? p->ids.size() : 0; }

btyd_status btyd_params_get(const btyd_params* p, size_t i, const char** id, double* lambda,
                            double* mu) {
  return guard([&] {
    need(p);
    require(i < p->ids.size(), ErrorKind::kInvalidArgument, "parameter index out of range");
    if (id) *id = p->ids[i].c_str();
    if (lambda) *lambda = p->values[i].lambda;
    if (mu) *mu = p->values[i].mu;
  });
}

void btyd_params_free(btyd_params* p) { delete p; }

// ---- network

void btyd_train_defaults(btyd_train_config* cfg) {
  if (!cfg) return;
  const NetworkSpec n;
  const TrainingConfig t;
  cfg->hidden_layers = n.hidden_layers;
  cfg->hidden_width = n.hidden_width;
  cfg->dropout = n.dropout_p;
  cfg->epochs = t.epochs;
  cfg->batch_size = t.batch_size;
  cfg->learning_rate = t.learning_rate;
  cfg->patience = t.early_stop_patience;
  cfg->validation_fraction = t.validation_fraction;
  cfg->seed = t.seed;
}

btyd_status btyd_train(const btyd_cohort* c, const btyd_params* labels,
                       const btyd_train_config* cfg, const char* loss, const char* ratio,
                       btyd_model** out) {
  return guard([&] {
    need(c, labels, cfg, loss, out);
    NetworkSpec spec;
    spec.hidden_layers = cfg->hidden_layers;
    spec.hidden_width = cfg->hidden_width;
    spec.dropout_p = cfg->dropout;
    TrainingConfig t;
    t.epochs = cfg->epochs;
    t.batch_size = cfg->batch_size;
    t.learning_rate = cfg->learning_rate;
    t.early_stop_patience = cfg->patience;
    t.validation_fraction = cfg->validation_fraction;
    t.seed = cfg->seed;
    LossConfig lc;
    lc.kind = parse_loss_kind(loss);
    if (ratio) lc.ratio = parse_ratio_interpretation(ratio);
    require(!c->c.train.empty(), ErrorKind::kInvalidArgument, "cohort has no training rows");
    const auto y = params_for(c->c.train, labels->ids, labels->values);
    auto h = std::make_unique<btyd_model>();
    h->m = train(c->c.train, y, spec, t, lc, c->c.covariate_names);
    *out = h.release();
  });
}

btyd_status btyd_model_save(const btyd_model* m, const char* path) {
  return guard([&] {
    need(m, path);
    save_model(m->m, path);
  });
}

btyd_status btyd_model_load(const char* path, btyd_model** out) {
  return guard([&] {
    need(path, out);
    auto h = std::make_unique<btyd_model>();
    h->m = load_model(path);
    *out = h.release();
  });
}

btyd_status btyd_model_save_history(const btyd_model* m, const char* path) {
  return guard([&] {
    need(m, path);
    write_history_csv(m->m.history, path);
  });
}

btyd_status btyd_model_predict(const btyd_model* m, const btyd_cohort* c, btyd_params** out) {
  return guard([&] {
    need(m, c, out);
    require(m->m.feature_names.size() == c->c.covariate_names.size() + 3,
            ErrorKind::kInvalidArgument, "model and cohort covariates differ");
    auto h = std::make_unique<btyd_params>();
    h->values = predict_params(c->c.test, m->m);
    for (const auto& s : c->c.test) h->ids.push_back(s.customer_id);
    *out = h.release();
  });
}

void btyd_model_free(btyd_model* m) { delete m; }

// ---- forecasts and metrics

btyd_status btyd_forecast(const btyd_cohort* c, const btyd_params* p, double threshold,
                          const char* rounding, btyd_forecasts** out) {
  return guard([&] {
    need(c, p, out);
    const Rounding mode = rounding ? parse_rounding(rounding) : Rounding::kHalfAwayFromZero;
    const auto values = params_for(c->c.test, p->ids, p->values);
    auto h = std::make_unique<btyd_forecasts>();
    h->f = forecast_all(c->c.test, values, c->c.holdout_weeks, threshold, mode);
    *out = h.release();
  });
}

btyd_status btyd_forecasts_save(const btyd_forecasts* f, const char* path) {
  return guard([&] {
    need(f, path);
    write_forecast_csv(f->f, path);
  });
}

btyd_status btyd_forecasts_load(const char* path, btyd_forecasts** out) {
  return guard([&] {
    need(path, out);
    auto h = std::make_unique<btyd_forecasts>();
    h->f = read_forecast_csv(path);
    *out = h.release();
  });
}

size_t btyd_forecasts_count(const btyd_forecasts* f) { return f ? f->f.size() : 0; }

void btyd_forecasts_free(btyd_forecasts* f) { delete f; }

btyd_status btyd_evaluate(const btyd_cohort* c, const btyd_forecasts* f,
                          const btyd_forecasts* baseline, int cap, const char* model_name,
                          btyd_report** out) {
  return guard([&] {
    need(c, f, model_name, out);
    auto h = std::make_unique<btyd_report>();
    h->r = evaluate(model_name, f->f, c->c.test, cap, baseline ? &baseline->f : nullptr);
    h->json = report_json(h->r);
    *out = h.release();
  });
}

const char* btyd_report_json(const btyd_report* r) { return r ? r->json.c_str() : ""; }

btyd_status btyd_report_save_json(const btyd_report* r, const char* path) {
  return guard([&] {
    need(r, path);
    write_report_json(r->r, path);
  });
}

void btyd_report_free(btyd_report* r) { delete r; }

// ---- experiment

btyd_status btyd_config_default(btyd_config** out) {
  return guard([&] {
    need(out);
    *out = new btyd_config();
  });
}

btyd_status btyd_config_load(const char* path, btyd_config** out) {
  return guard([&] {
    need(path, out);
    auto h = std::make_unique<btyd_config>();
    h->cfg = load_config(path);
    *out = h.release();
  });
}

btyd_status btyd_config_set(btyd_config* cfg, const char* key, const char* value) {
  return guard([&] {
    need(cfg, key, value);
    cfg->cfg.set(key, value);
  });
}

const char* btyd_config_output_dir(const btyd_config* cfg) {
  if (!cfg) return "";
  thread_local std::string dir;
  dir = cfg->cfg.output_dir.string();
  return dir.c_str();
}

btyd_status btyd_run_experiment(const btyd_config* cfg) {
  return guard([&] {
    need(cfg);
    run_experiment(cfg->cfg);
  });
}

void btyd_config_free(btyd_config* cfg) { delete cfg; }

}  // extern "C"
