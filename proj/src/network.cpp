#include "btydnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "btydnn/error.hpp"
#include "text_util.hpp"

namespace btydnn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags derived from TrainingConfig::seed.
constexpr std::uint64_t kTagInit = 11;
constexpr std::uint64_t kTagValidation = 12;
constexpr std::uint64_t kTagShuffle = 13;
constexpr std::uint64_t kTagDropout = 14;

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void dense(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
  out.resize(std::size_t(layer.out));
  for (int o = 0; o < layer.out; ++o) {
    const double* row = layer.weights.data() + std::size_t(o) * std::size_t(layer.in);
    double acc = layer.bias[std::size_t(o)];
    for (int i = 0; i < layer.in; ++i) acc += row[i] * in[std::size_t(i)];
    out[std::size_t(o)] = acc;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

void NetworkSpec::validate() const {
  require(input_dim > 0 && hidden_layers >= 1 && hidden_width > 0,
          ErrorKind::kInvalidArgument, "network dimensions must be positive");
  require(dropout_p >= 0.0 && dropout_p < 1.0, ErrorKind::kInvalidArgument,
          "dropout probability must lie in [0, 1)");
}

std::size_t NetworkWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

NetworkWeights init_weights(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  NetworkWeights w;
  int fan_in = spec.input_dim;
  for (int l = 0; l <= spec.hidden_layers; ++l) {
    const int fan_out = l < spec.hidden_layers ? spec.hidden_width : 2;
    DenseLayer layer{fan_in, fan_out, {}, {}};
    const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    layer.weights.resize(std::size_t(fan_in) * std::size_t(fan_out));
    for (auto& v : layer.weights) v = (2.0 * rng.uniform() - 1.0) * bound;
    layer.bias.assign(std::size_t(fan_out), 0.0);
    w.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return w;
}

NetworkWeights zeros_like(const NetworkWeights& w) {
  NetworkWeights z = w;
  for (auto& l : z.layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  return z;
}

IndividualParams forward(std::span<const double> features, const NetworkWeights& w,
                         const NetworkSpec& spec, Mode mode, Rng* rng,
                         ForwardCache* cache) {
  require(!w.layers.empty() && features.size() == std::size_t(w.layers.front().in),
          ErrorKind::kInvalidArgument,
          "feature dimension " + std::to_string(features.size()) +
              " does not match the network input");
  const bool drop = mode == Mode::kTrain && spec.dropout_p > 0.0;
  require(!drop || rng != nullptr, ErrorKind::kInvalidArgument,
          "train-mode dropout needs an rng");
  const std::size_t hidden = w.layers.size() - 1;
  const double keep_scale = 1.0 / (1.0 - spec.dropout_p);

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.inputs.resize(w.layers.size());
  c.sigmoid.resize(hidden);
  c.masks.resize(hidden);
  c.inputs[0].assign(features.begin(), features.end());

  for (std::size_t l = 0; l < hidden; ++l) {
    auto& sig = c.sigmoid[l];
    dense(w.layers[l], c.inputs[l], sig);
    auto& mask = c.masks[l];
    mask.resize(sig.size());
    auto& next = c.inputs[l + 1];
    next.resize(sig.size());
    for (std::size_t j = 0; j < sig.size(); ++j) {
      sig[j] = sigmoid(sig[j]);
      mask[j] = drop ? (rng->uniform() < spec.dropout_p ? 0.0 : keep_scale) : 1.0;
      next[j] = sig[j] * mask[j];
    }
  }
  std::vector<double> out;
  dense(w.layers.back(), c.inputs[hidden], out);
  c.pre_lambda = out[0];
  c.pre_mu = out[1];
  return {std::exp(std::clamp(out[0], -kOutputClamp, kOutputClamp)),
          std::exp(std::clamp(out[1], -kOutputClamp, kOutputClamp))};
}

// ---------------------------------------------------------------------------

LossKind parse_loss_kind(const std::string& name) {
  for (auto k : kAllLossKinds) {
    if (loss_kind_name(k) == name) return k;
  }
  fail(ErrorKind::kInvalidArgument, "unknown loss kind '" + name + "'");
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kMse: return "mse";
    case LossKind::kMae: return "mae";
    case LossKind::kNll: return "nll";
    case LossKind::kNllMse: return "nll_mse";
    case LossKind::kNllMae: return "nll_mae";
    case LossKind::kRatio: return "ratio";
    case LossKind::kRatioMse: return "ratio_mse";
    case LossKind::kRatioMae: return "ratio_mae";
  }
  return "unknown";
}

RatioInterpretation parse_ratio_interpretation(const std::string& name) {
  if (name == "weighted_nll") return RatioInterpretation::kWeightedNll;
  if (name == "abs_log_ratio") return RatioInterpretation::kAbsLogRatio;
  fail(ErrorKind::kInvalidArgument, "unknown ratio interpretation '" + name + "'");
}

std::string ratio_interpretation_name(RatioInterpretation r) {
  return r == RatioInterpretation::kWeightedNll ? "weighted_nll" : "abs_log_ratio";
}

bool uses_likelihood(LossKind kind) {
  return kind != LossKind::kMse && kind != LossKind::kMae;
}

PointLoss point_loss(const Rfm& s, const IndividualParams& label,
                     const IndividualParams& pred, const LossConfig& cfg,
                     double label_loglik) {
  require(label.lambda > 0.0 && label.mu > 0.0 && pred.lambda > 0.0 && pred.mu > 0.0,
          ErrorKind::kDomain, "loss needs positive labels and predictions");
  PointLoss pl;
  const auto add_mse = [&] {
    const double dl = pred.lambda - label.lambda;
    const double dm = pred.mu - label.mu;
    pl.value += dl * dl + dm * dm;
    pl.d_lambda += 2.0 * dl;
    pl.d_mu += 2.0 * dm;
  };
  const auto add_mae = [&] {
    const double dl = pred.lambda - label.lambda;
    const double dm = pred.mu - label.mu;
    pl.value += std::abs(dl) + std::abs(dm);
    pl.d_lambda += sign(dl);
    pl.d_mu += sign(dm);
  };
  const auto add_nll = [&] {
    const double ll = log_likelihood(s, pred);
    const auto g = grad_log_likelihood(s, pred);
    pl.value -= ll;
    pl.d_lambda -= g.d_lambda;
    pl.d_mu -= g.d_mu;
  };
  const auto add_ratio = [&] {
    const double ll = log_likelihood(s, pred);
    const auto g = grad_log_likelihood(s, pred);
    const double gap = ll - label_loglik;
    if (cfg.ratio == RatioInterpretation::kWeightedNll) {
      if (gap >= kRatioExponentClamp) {
        pl.value -= std::exp(kRatioExponentClamp);
        return;
      }
      const double ratio = std::exp(gap);
      pl.value -= ratio;
      pl.d_lambda -= ratio * g.d_lambda;
      pl.d_mu -= ratio * g.d_mu;
    } else {
      pl.value += std::abs(gap);
      pl.d_lambda += sign(gap) * g.d_lambda;
      pl.d_mu += sign(gap) * g.d_mu;
    }
  };

  switch (cfg.kind) {
    case LossKind::kMse: add_mse(); break;
    case LossKind::kMae: add_mae(); break;
    case LossKind::kNll: add_nll(); break;
    case LossKind::kNllMse: add_nll(); add_mse(); break;
    case LossKind::kNllMae: add_nll(); add_mae(); break;
    case LossKind::kRatio: add_ratio(); break;
    case LossKind::kRatioMse: add_ratio(); add_mse(); break;
    case LossKind::kRatioMae: add_ratio(); add_mae(); break;
  }
  return pl;
}

double loss(std::span<const LossSample> batch, const LossConfig& cfg) {
  require(!batch.empty(), ErrorKind::kInvalidArgument, "loss of an empty batch");
  double total = 0.0;
  const bool ratio = cfg.kind == LossKind::kRatio || cfg.kind == LossKind::kRatioMse ||
                     cfg.kind == LossKind::kRatioMae;
  for (const auto& b : batch) {
    const double label_ll = ratio ? log_likelihood(b.rfm, b.label) : 0.0;
    total += point_loss(b.rfm, b.label, b.prediction, cfg, label_ll).value;
  }
  return total / double(batch.size());
}

TrainingSample make_training_sample(std::vector<double> features, const Rfm& rfm,
                                    const IndividualParams& label) {
  return {std::move(features), rfm, label, log_likelihood(rfm, label)};
}

LossAndGradient loss_gradient(std::span<const TrainingSample* const> batch,
                              const NetworkWeights& w, const NetworkSpec& spec,
                              const LossConfig& cfg, Mode mode, Rng* rng) {
  require(!batch.empty(), ErrorKind::kInvalidArgument, "gradient of an empty batch");
  LossAndGradient out{0.0, zeros_like(w)};
  const double scale = 1.0 / double(batch.size());
  ForwardCache cache;
  std::vector<double> delta, prev;
  for (const TrainingSample* sample : batch) {
    const IndividualParams pred = forward(sample->features, w, spec, mode, rng, &cache);
    const PointLoss pl =
        point_loss(sample->rfm, sample->label, pred, cfg, sample->label_loglik);
    out.loss += pl.value * scale;

    // d/d(pre-activation) of exp(clamp(z)) is exp(z) strictly inside the clamp.
    delta.assign(2, 0.0);
    if (std::abs(cache.pre_lambda) < kOutputClamp) delta[0] = pl.d_lambda * pred.lambda * scale;
    if (std::abs(cache.pre_mu) < kOutputClamp) delta[1] = pl.d_mu * pred.mu * scale;

    for (std::size_t l = w.layers.size(); l-- > 0;) {
      const DenseLayer& layer = w.layers[l];
      DenseLayer& g = out.grad.layers[l];
      const auto& in = cache.inputs[l];
      for (int o = 0; o < layer.out; ++o) {
        const double d = delta[std::size_t(o)];
        if (d == 0.0) continue;
        g.bias[std::size_t(o)] += d;
        double* grow = g.weights.data() + std::size_t(o) * std::size_t(layer.in);
        for (int i = 0; i < layer.in; ++i) grow[i] += d * in[std::size_t(i)];
      }
      if (l == 0) break;
      // Back through layer l's weights into hidden layer l-1.
      prev.assign(std::size_t(layer.in), 0.0);
      for (int o = 0; o < layer.out; ++o) {
        const double d = delta[std::size_t(o)];
        if (d == 0.0) continue;
        const double* row = layer.weights.data() + std::size_t(o) * std::size_t(layer.in);
        for (int i = 0; i < layer.in; ++i) prev[std::size_t(i)] += row[i] * d;
      }
      const auto& sig = cache.sigmoid[l - 1];
      const auto& mask = cache.masks[l - 1];
      for (std::size_t i = 0; i < prev.size(); ++i) {
        prev[i] *= mask[i] * sig[i] * (1.0 - sig[i]);
      }
      delta.swap(prev);
    }
  }
  return out;
}

LossAndGradient loss_gradient(std::span<const TrainingSample> batch,
                              const NetworkWeights& w, const NetworkSpec& spec,
                              const LossConfig& cfg, Mode mode, Rng* rng) {
  std::vector<const TrainingSample*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& s : batch) ptrs.push_back(&s);
  return loss_gradient(std::span<const TrainingSample* const>(ptrs), w, spec, cfg, mode,
                       rng);
}

// ---------------------------------------------------------------------------

FeatureScaler FeatureScaler::fit(std::span<const std::vector<double>> rows) {
  require(!rows.empty(), ErrorKind::kInvalidArgument, "scaler needs at least one row");
  const std::size_t dim = rows.front().size();
  FeatureScaler sc;
  sc.mean.assign(dim, 0.0);
  sc.stddev.assign(dim, 0.0);
  for (const auto& r : rows) {
    require(r.size() == dim, ErrorKind::kInvalidArgument, "ragged feature rows");
    for (std::size_t j = 0; j < dim; ++j) sc.mean[j] += r[j];
  }
  for (auto& m : sc.mean) m /= double(rows.size());
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = r[j] - sc.mean[j];
      sc.stddev[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < dim; ++j) {
    sc.stddev[j] = std::sqrt(sc.stddev[j] / double(rows.size()));
    require(sc.stddev[j] > 1e-12 * std::max(1.0, std::abs(sc.mean[j])),
            ErrorKind::kInvalidArgument,
            "feature column " + std::to_string(j) + " is constant");
  }
  return sc;
}

std::vector<double> FeatureScaler::transform(std::span<const double> row) const {
  require(row.size() == mean.size(), ErrorKind::kInvalidArgument,
          "feature dimension does not match the scaler");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / stddev[j];
  return out;
}

std::vector<double> raw_features(const CalibrationSummary& s) {
  std::vector<double> f{s.T, s.t_x, double(s.x)};
  f.insert(f.end(), s.covariates.begin(), s.covariates.end());
  return f;
}

void TrainingConfig::validate() const {
  require(epochs >= 0, ErrorKind::kInvalidArgument, "epochs must be nonnegative");
  require(batch_size > 0, ErrorKind::kInvalidArgument, "batch size must be positive");
  require(learning_rate > 0.0, ErrorKind::kInvalidArgument,
          "learning rate must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 &&
              adam_beta2 < 1.0 && adam_eps > 0.0,
          ErrorKind::kInvalidArgument, "invalid Adam constants");
  require(early_stop_patience >= 0, ErrorKind::kInvalidArgument,
          "patience must be nonnegative");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0,
          ErrorKind::kInvalidArgument, "validation fraction must lie in [0, 1)");
}

namespace {

double mean_loss(std::span<const TrainingSample* const> rows, const NetworkWeights& w,
                 const NetworkSpec& spec, const LossConfig& cfg) {
  if (rows.empty()) return kNaN;
  double total = 0.0;
  ForwardCache cache;
  for (const auto* s : rows) {
    const auto pred = forward(s->features, w, spec, Mode::kInfer, nullptr, &cache);
    total += point_loss(s->rfm, s->label, pred, cfg, s->label_loglik).value;
  }
  return total / double(rows.size());
}

struct Adam {
  const TrainingConfig& cfg;
  Gradients m, v;
  long step = 0;

  Adam(const TrainingConfig& c, const NetworkWeights& w)
      : cfg(c), m(zeros_like(w)), v(zeros_like(w)) {}

  void apply(NetworkWeights& w, const Gradients& g) {
    ++step;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, double(step));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, double(step));
    const auto update = [&](std::vector<double>& p, const std::vector<double>& gr,
                            std::vector<double>& mm, std::vector<double>& vv) {
      for (std::size_t k = 0; k < p.size(); ++k) {
        mm[k] = cfg.adam_beta1 * mm[k] + (1.0 - cfg.adam_beta1) * gr[k];
        vv[k] = cfg.adam_beta2 * vv[k] + (1.0 - cfg.adam_beta2) * gr[k] * gr[k];
        p[k] -= cfg.learning_rate * (mm[k] / c1) / (std::sqrt(vv[k] / c2) + cfg.adam_eps);
      }
    };
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
      update(w.layers[l].weights, g.layers[l].weights, m.layers[l].weights,
             v.layers[l].weights);
      update(w.layers[l].bias, g.layers[l].bias, m.layers[l].bias, v.layers[l].bias);
    }
  }
};

}  // namespace

std::uint64_t init_seed_for(std::uint64_t training_seed) {
  return derive_seed(training_seed, kTagInit);
}

TrainedModel train(const std::vector<CalibrationSummary>& summaries,
                   const std::vector<IndividualParams>& labels, NetworkSpec spec,
                   const TrainingConfig& cfg, const LossConfig& loss_cfg,
                   const std::vector<std::string>& covariate_names) {
  cfg.validate();
  require(summaries.size() == labels.size(), ErrorKind::kInvalidArgument,
          "summary and label counts differ");
  require(summaries.size() >= std::size_t(cfg.batch_size), ErrorKind::kInvalidArgument,
          "fewer training rows than one batch");
  const std::size_t n = summaries.size();

  std::vector<std::vector<double>> raw;
  raw.reserve(n);
  for (const auto& s : summaries) raw.push_back(raw_features(s));
  spec.input_dim = int(raw.front().size());
  spec.validate();

  // Validation slice: a seeded random subset held back from updates.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  {
    Rng rng(derive_seed(cfg.seed, kTagValidation));
    shuffle(std::span<std::size_t>(order), rng);
  }
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * double(n)));
  std::vector<std::size_t> train_idx(order.begin(), order.end() - long(n_val));
  std::vector<std::size_t> val_idx(order.end() - long(n_val), order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  require(train_idx.size() >= std::size_t(cfg.batch_size), ErrorKind::kInvalidArgument,
          "fewer training rows than one batch after the validation split");

  std::vector<std::vector<double>> fit_rows;
  fit_rows.reserve(train_idx.size());
  for (auto i : train_idx) fit_rows.push_back(raw[i]);

  TrainedModel model;
  model.spec = spec;
  model.loss = loss_cfg;
  model.scaler = FeatureScaler::fit(fit_rows);
  model.feature_names = {"T", "t_x", "x"};
  for (const auto& c : covariate_names) model.feature_names.push_back("cov_" + c);
  require(model.feature_names.size() == std::size_t(spec.input_dim),
          ErrorKind::kInvalidArgument, "covariate names do not match the summaries");
  model.weights = init_weights(spec, init_seed_for(cfg.seed));

  std::vector<TrainingSample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    samples.push_back(make_training_sample(model.scaler.transform(raw[i]),
                                           Rfm::of(summaries[i]), labels[i]));
  }
  std::vector<const TrainingSample*> train_rows, val_rows;
  for (auto i : train_idx) train_rows.push_back(&samples[i]);
  for (auto i : val_idx) val_rows.push_back(&samples[i]);

  auto record = [&](int epoch) {
    model.history.push_back({epoch, mean_loss(train_rows, model.weights, spec, loss_cfg),
                             mean_loss(val_rows, model.weights, spec, loss_cfg)});
  };
  record(0);

  const bool early_stop = cfg.early_stop_patience > 0 && !val_rows.empty();
  NetworkWeights best = model.weights;
  double best_val = model.history.back().val_loss;
  int since_best = 0;

  Adam adam(cfg, model.weights);
  std::vector<const TrainingSample*> shuffled = train_rows;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, kTagShuffle, std::uint64_t(epoch)));
    shuffle(std::span<const TrainingSample*>(shuffled), shuffle_rng);
    Rng dropout_rng(derive_seed(cfg.seed, kTagDropout, std::uint64_t(epoch)));
    for (std::size_t b = 0; b < shuffled.size(); b += std::size_t(cfg.batch_size)) {
      const std::size_t e = std::min(shuffled.size(), b + std::size_t(cfg.batch_size));
      const std::span<const TrainingSample* const> batch(shuffled.data() + b, e - b);
      const auto lg =
          loss_gradient(batch, model.weights, spec, loss_cfg, Mode::kTrain, &dropout_rng);
      adam.apply(model.weights, lg.grad);
    }
    record(epoch);
    if (early_stop) {
      const double v = model.history.back().val_loss;
      if (v < best_val) {
        best_val = v;
        best = model.weights;
        model.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.early_stop_patience) {
        break;
      }
    } else {
      model.best_epoch = epoch;
    }
  }
  if (early_stop) model.weights = best;
  return model;
}

std::vector<IndividualParams> predict_params(
    const std::vector<CalibrationSummary>& summaries, const NetworkWeights& w,
    const NetworkSpec& spec, const FeatureScaler& scaler) {
  std::vector<IndividualParams> out;
  out.reserve(summaries.size());
  ForwardCache cache;
  for (const auto& s : summaries) {
    const auto f = scaler.transform(raw_features(s));
    out.push_back(forward(f, w, spec, Mode::kInfer, nullptr, &cache));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kModelMagic = "btydnn-model";
constexpr int kModelVersion = 1;

void write_values(std::ostream& out, const char* key, const std::vector<double>& v) {
  out << key;
  for (double x : v) out << ' ' << detail::fmt(x);
  out << '\n';
}

std::vector<std::string_view> expect_line(std::istream& in, std::string& buf,
                                          const std::string& key,
                                          const std::filesystem::path& path) {
  require(static_cast<bool>(std::getline(in, buf)), ErrorKind::kParse,
          path.string() + ": truncated model file (expected '" + key + "')");
  auto f = detail::split_ws(buf);
  require(!f.empty() && f[0] == key, ErrorKind::kParse,
          path.string() + ": expected '" + key + "' line");
  f.erase(f.begin());
  return f;
}

std::vector<double> parse_values(const std::vector<std::string_view>& f,
                                 std::size_t expected, const std::filesystem::path& path) {
  require(f.size() == expected, ErrorKind::kParse,
          path.string() + ": wrong value count in model file");
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    require(detail::try_double(f[i], v[i]), ErrorKind::kParse,
            path.string() + ": malformed number in model file");
  }
  return v;
}

int parse_int_field(std::string_view s, const std::filesystem::path& path) {
  long v = 0;
  require(detail::try_long(s, v), ErrorKind::kParse,
          path.string() + ": malformed integer in model file");
  return int(v);
}

}  // namespace

void save_model(const TrainedModel& m, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "spec " << m.spec.input_dim << ' ' << m.spec.hidden_layers << ' '
      << m.spec.hidden_width << ' ' << detail::fmt(m.spec.dropout_p) << '\n';
  out << "loss " << loss_kind_name(m.loss.kind) << ' '
      << ratio_interpretation_name(m.loss.ratio) << '\n';
  out << "features";
  for (const auto& f : m.feature_names) out << ' ' << f;
  out << '\n';
  write_values(out, "scaler_mean", m.scaler.mean);
  write_values(out, "scaler_std", m.scaler.stddev);
  out << "best_epoch " << m.best_epoch << '\n';
  out << "layers " << m.weights.layers.size() << '\n';
  for (const auto& l : m.weights.layers) {
    out << "layer " << l.in << ' ' << l.out << '\n';
    write_values(out, "w", l.weights);
    write_values(out, "b", l.bias);
  }
}

TrainedModel load_model(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string buf;
  TrainedModel m;
  {
    auto f = expect_line(in, buf, kModelMagic, path);
    require(f.size() == 1 && parse_int_field(f[0], path) == kModelVersion,
            ErrorKind::kParse, path.string() + ": unsupported model version");
  }
  {
    auto f = expect_line(in, buf, "spec", path);
    require(f.size() == 4, ErrorKind::kParse, path.string() + ": bad spec line");
    m.spec.input_dim = parse_int_field(f[0], path);
    m.spec.hidden_layers = parse_int_field(f[1], path);
    m.spec.hidden_width = parse_int_field(f[2], path);
    require(detail::try_double(f[3], m.spec.dropout_p), ErrorKind::kParse,
            path.string() + ": bad dropout value");
    m.spec.validate();
  }
  {
    auto f = expect_line(in, buf, "loss", path);
    require(f.size() == 2, ErrorKind::kParse, path.string() + ": bad loss line");
    m.loss.kind = parse_loss_kind(std::string(f[0]));
    m.loss.ratio = parse_ratio_interpretation(std::string(f[1]));
  }
  {
    auto f = expect_line(in, buf, "features", path);
    for (auto s : f) m.feature_names.emplace_back(s);
    require(m.feature_names.size() == std::size_t(m.spec.input_dim), ErrorKind::kParse,
            path.string() + ": feature count does not match the spec");
  }
  const auto dim = std::size_t(m.spec.input_dim);
  m.scaler.mean = parse_values(expect_line(in, buf, "scaler_mean", path), dim, path);
  m.scaler.stddev = parse_values(expect_line(in, buf, "scaler_std", path), dim, path);
  {
    auto f = expect_line(in, buf, "best_epoch", path);
    require(f.size() == 1, ErrorKind::kParse, path.string() + ": bad best_epoch");
    m.best_epoch = parse_int_field(f[0], path);
  }
  auto f = expect_line(in, buf, "layers", path);
  require(f.size() == 1, ErrorKind::kParse, path.string() + ": bad layers line");
  const int count = parse_int_field(f[0], path);
  require(count == m.spec.hidden_layers + 1, ErrorKind::kParse,
          path.string() + ": layer count does not match the spec");
  int expected_in = m.spec.input_dim;
  for (int l = 0; l < count; ++l) {
    auto lf = expect_line(in, buf, "layer", path);
    require(lf.size() == 2, ErrorKind::kParse, path.string() + ": bad layer line");
    DenseLayer layer;
    layer.in = parse_int_field(lf[0], path);
    layer.out = parse_int_field(lf[1], path);
    const int expected_out = l < m.spec.hidden_layers ? m.spec.hidden_width : 2;
    require(layer.in == expected_in && layer.out == expected_out, ErrorKind::kParse,
            path.string() + ": layer shape does not match the spec");
    layer.weights = parse_values(expect_line(in, buf, "w", path),
                                 std::size_t(layer.in) * std::size_t(layer.out), path);
    layer.bias = parse_values(expect_line(in, buf, "b", path), std::size_t(layer.out), path);
    m.weights.layers.push_back(std::move(layer));
    expected_in = expected_out;
  }
  return m;
}

void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "epoch,train_loss,val_loss\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << detail::fmt(h.train_loss) << ','
        << (std::isnan(h.val_loss) ? std::string("NA") : detail::fmt(h.val_loss)) << '\n';
  }
}

}  // namespace btydnn
