#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "btydnn/data_pipeline.hpp"
#include "btydnn/pareto_nbd.hpp"
#include "btydnn/random.hpp"

namespace btydnn {

// ---------------------------------------------------------------------------
// Network shape and weights
// ---------------------------------------------------------------------------

struct NetworkSpec {
  int input_dim = 3;  // (T, t_x, x) plus covariates
  int hidden_layers = 2;
  int hidden_width = 20;
  double dropout_p = 0.2;

  void validate() const;
};

// Row-major `out x in` weight matrix plus bias.
struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& w(int o, int i) { return weights[std::size_t(o) * std::size_t(in) + std::size_t(i)]; }
  double w(int o, int i) const {
    return weights[std::size_t(o) * std::size_t(in) + std::size_t(i)];
  }
  bool operator==(const DenseLayer&) const = default;
};

// Hidden sigmoid layers followed by a linear layer with two outputs, mapped to
// (lambda_hat, mu_hat) by exp of the clamped pre-activations.
struct NetworkWeights {
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const;
  bool operator==(const NetworkWeights&) const = default;
};

// Same shapes as NetworkWeights; used for gradients and Adam moments.
using Gradients = NetworkWeights;

NetworkWeights init_weights(const NetworkSpec& spec, std::uint64_t seed);
NetworkWeights zeros_like(const NetworkWeights& w);

// Pre-activation clamp for the positivity transform.
inline constexpr double kOutputClamp = 30.0;

enum class Mode { kTrain, kInfer };

// Activations kept for backpropagation. `inputs[l]` is what layer l consumed
// (hidden outputs after the dropout mask); `sigmoid[l]` is hidden layer l
// before masking and `masks[l]` its multipliers (0 or 1/(1-p)).
struct ForwardCache {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> sigmoid;
  std::vector<std::vector<double>> masks;
  double pre_lambda = 0.0;
  double pre_mu = 0.0;
};

// `features` must already be standardized. `rng` is only used in train mode.
IndividualParams forward(std::span<const double> features, const NetworkWeights& w,
                         const NetworkSpec& spec, Mode mode, Rng* rng = nullptr,
                         ForwardCache* cache = nullptr);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

enum class LossKind { kMse, kMae, kNll, kNllMse, kNllMae, kRatio, kRatioMse, kRatioMae };

enum class RatioInterpretation {
  kWeightedNll,  // -exp(logL(pred) - logL(label)), exponent clamped at 30
  kAbsLogRatio,  // |logL(pred) - logL(label)|
};

struct LossConfig {
  LossKind kind = LossKind::kNll;
  RatioInterpretation ratio = RatioInterpretation::kWeightedNll;
};

inline constexpr LossKind kAllLossKinds[] = {
    LossKind::kMse,   LossKind::kMae,      LossKind::kNll,      LossKind::kNllMse,
    LossKind::kNllMae, LossKind::kRatio, LossKind::kRatioMse, LossKind::kRatioMae};

inline constexpr double kRatioExponentClamp = 30.0;

LossKind parse_loss_kind(const std::string& name);
std::string loss_kind_name(LossKind kind);
RatioInterpretation parse_ratio_interpretation(const std::string& name);
std::string ratio_interpretation_name(RatioInterpretation r);
// True for the six kinds that embed the likelihood.
bool uses_likelihood(LossKind kind);

struct PointLoss {
  double value = 0.0;
  double d_lambda = 0.0;  // d value / d lambda_hat
  double d_mu = 0.0;      // d value / d mu_hat
};

// Loss of one datapoint and its derivative with respect to the prediction.
// `label_loglik` is log L(x, t_x, T | label) and is only read by ratio kinds.
PointLoss point_loss(const Rfm& s, const IndividualParams& label,
                     const IndividualParams& pred, const LossConfig& cfg,
                     double label_loglik);

struct LossSample {
  Rfm rfm;
  IndividualParams label;
  IndividualParams prediction;
};

// Mean per-datapoint loss.
double loss(std::span<const LossSample> batch, const LossConfig& cfg);

// One training example: standardized features, RFM and label.
struct TrainingSample {
  std::vector<double> features;
  Rfm rfm;
  IndividualParams label;
  double label_loglik = 0.0;
};

TrainingSample make_training_sample(std::vector<double> features, const Rfm& rfm,
                                    const IndividualParams& label);

struct LossAndGradient {
  double loss = 0.0;
  Gradients grad;
};

// Exact gradient of the mean batch loss composed with `forward`. In train
// mode dropout masks are drawn from `rng`; in infer mode dropout is off.
LossAndGradient loss_gradient(std::span<const TrainingSample* const> batch,
                              const NetworkWeights& w, const NetworkSpec& spec,
                              const LossConfig& cfg, Mode mode, Rng* rng);
LossAndGradient loss_gradient(std::span<const TrainingSample> batch,
                              const NetworkWeights& w, const NetworkSpec& spec,
                              const LossConfig& cfg, Mode mode, Rng* rng);

// ---------------------------------------------------------------------------
// Features, training and inference
// ---------------------------------------------------------------------------

// Per-feature z-score parameters fit on training rows.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  static FeatureScaler fit(std::span<const std::vector<double>> rows);
  std::vector<double> transform(std::span<const double> row) const;
  bool operator==(const FeatureScaler&) const = default;
};

// Raw network inputs: (T, t_x, x, covariates...).
std::vector<double> raw_features(const CalibrationSummary& s);

struct TrainingConfig {
  int epochs = 500;
  int batch_size = 256;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  int early_stop_patience = 10;  // 0 disables early stopping
  double validation_fraction = 0.1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 0 = before the first update
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation slice
};

struct TrainedModel {
  NetworkSpec spec;
  NetworkWeights weights;
  FeatureScaler scaler;
  LossConfig loss;
  std::vector<std::string> feature_names;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

// Seed that train() hands to init_weights.
std::uint64_t init_seed_for(std::uint64_t training_seed);

TrainedModel train(const std::vector<CalibrationSummary>& summaries,
                   const std::vector<IndividualParams>& labels, NetworkSpec spec,
                   const TrainingConfig& cfg, const LossConfig& loss_cfg,
                   const std::vector<std::string>& covariate_names = {});

std::vector<IndividualParams> predict_params(
    const std::vector<CalibrationSummary>& summaries, const NetworkWeights& w,
    const NetworkSpec& spec, const FeatureScaler& scaler);

inline std::vector<IndividualParams> predict_params(
    const std::vector<CalibrationSummary>& summaries, const TrainedModel& m) {
  return predict_params(summaries, m.weights, m.spec, m.scaler);
}

// Text model file; every double is written in shortest round-trip form, so
// save/load is bit-exact.
void save_model(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

// `epoch,train_loss,val_loss`
void write_history_csv(const std::vector<EpochRecord>& history,
                       const std::filesystem::path& path);

}  // namespace btydnn
