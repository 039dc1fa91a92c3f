#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btydnn/pareto_nbd.hpp"
#include "btydnn/random.hpp"

namespace btydnn {

// Shapes and rates of the two Gamma mixing distributions.
struct HyperParams {
  double r = 1.0;
  double alpha = 1.0;
  double s = 1.0;
  double beta = 1.0;
};

struct ChainConfig {
  int sweeps = 4000;
  int burn_in = 1000;
  int thin = 2;
  std::uint64_t seed = 1;
  double a0 = 1e-3;  // Gamma(a0, b0) hyperprior on r, alpha, s, beta
  double b0 = 1e-3;
  bool keep_traces = false;
  // Holds (r, alpha, s, beta) at their initial values; used by joint
  // distribution checks that condition on known hyperparameters.
  bool fix_hyperparams = false;
  std::optional<HyperParams> initial_hyper;

  void validate() const;
};

// Per-customer augmented state.
struct LatentState {
  bool alive = true;
  double tau = 0.0;  // dropout time in (t_x, T]; meaningful only when !alive
};

struct PosteriorSummary {
  std::vector<std::string> customer_ids;
  std::vector<IndividualParams> mean_params;
  HyperParams mean_hyper;
  std::vector<HyperParams> hyper_trace;  // thinned, post burn-in
  std::size_t draws_kept = 0;
};

// --- single conditional draws ----------------------------------------------

bool draw_alive(const Rfm& s, const IndividualParams& p, double u);
// Inverse-CDF draw from the density proportional to e^{-(lambda+mu) tau} on
// (t_x, T).
double draw_dropout_time(const Rfm& s, const IndividualParams& p, double u);
double draw_lambda(const Rfm& s, const HyperParams& hp, double exposure, Rng& rng);
// Pass tau only for a customer drawn dead.
double draw_mu(const Rfm& s, const HyperParams& hp, bool alive,
               std::optional<double> tau, Rng& rng);

// Rate of a Gamma(shape, rate) population given the current shape and the
// individual draws: Gamma(a0 + N shape, b0 + sum(values)).
double draw_population_rate(double shape, std::span<const double> values, double a0,
                            double b0, Rng& rng);

// Log conditional of a population shape k given its rate and the draws:
//   (a0 - 1) ln k - b0 k + N (k ln rate - lgamma(k)) + (k - 1) sum(ln v).
// `sum_log_values` = sum(ln v).
double log_shape_conditional(double shape, double rate, std::size_t n,
                             double sum_log_values, double a0, double b0);

// Univariate slice sampler (stepping out + shrinkage) in log-shape space.
double slice_sample_shape(double current, double rate, std::size_t n,
                          double sum_log_values, double a0, double b0, Rng& rng);

// Generic slice sampler on the real line; `log_density` may return -inf.
double slice_sample(double x0, const std::function<double(double)>& log_density,
                    double width, Rng& rng, int max_steps = 64);

// One full hyperparameter update: alpha | r, r | alpha, beta | s, s | beta.
HyperParams update_hyperparams(std::span<const double> lambdas,
                               std::span<const double> mus, const HyperParams& hp,
                               const ChainConfig& cfg, Rng& rng);

// --- the sampler ------------------------------------------------------------

struct ChainState {
  std::vector<IndividualParams> params;
  std::vector<LatentState> latent;
  HyperParams hyper;
};

ChainState initial_state(std::span<const Rfm> data, const ChainConfig& cfg);

// Draws (z, tau), lambda, mu for every customer with hyperparameters held
// fixed. Customer i at sweep k uses its own stream derive_seed(seed, k, i),
// so results do not depend on the thread count.
void sweep_customers(std::span<const Rfm> data, ChainState& state,
                     std::uint64_t seed, std::uint64_t sweep);

PosteriorSummary run_chain(const std::vector<CalibrationSummary>& summaries,
                           const ChainConfig& cfg);

// Labels CSV `customer_id,lambda,mu`.
void write_labels_csv(const std::vector<std::string>& ids,
                      const std::vector<IndividualParams>& params,
                      const std::filesystem::path& path);
void read_labels_csv(const std::filesystem::path& path, std::vector<std::string>& ids,
                     std::vector<IndividualParams>& params);
// Thinned hyperparameter draws `draw,r,alpha,s,beta`.
void write_trace_csv(const PosteriorSummary& post, const std::filesystem::path& path);

}  // namespace btydnn
