#include "btydnn/bayes.hpp"

#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>

#include "btydnn/error.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace btydnn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Gamma draws of tiny shape can underflow; stored rates stay strictly positive.
double positive(double v) { return v > 0.0 ? v : DBL_MIN; }

}  // namespace

void ChainConfig::validate() const {
  require(sweeps > 0, ErrorKind::kInvalidArgument, "chain needs at least one sweep");
  require(burn_in >= 0 && burn_in < sweeps, ErrorKind::kInvalidArgument,
          "burn-in must lie in [0, sweeps)");
  require(thin > 0, ErrorKind::kInvalidArgument, "thin must be positive");
  require(a0 > 0.0 && b0 > 0.0, ErrorKind::kInvalidArgument,
          "hyperprior constants must be positive");
}

bool draw_alive(const Rfm& s, const IndividualParams& p, double u) {
  return u < p_alive(s, p);
}

double draw_dropout_time(const Rfm& s, const IndividualParams& p, double u) {
  const double gap = s.T - s.t_x;
  require(gap > 0.0, ErrorKind::kState,
          "dropout time requested for a customer with t_x = T");
  require(u >= 0.0 && u <= 1.0, ErrorKind::kInvalidArgument, "u must lie in [0, 1]");
  const double theta = p.lambda + p.mu;
  if (theta * gap < 1e-12) return s.t_x + u * gap;
  // tau = -ln(e^{-theta t_x} - u (e^{-theta t_x} - e^{-theta T})) / theta,
  // rewritten relative to t_x so nothing underflows.
  const double mass = -std::expm1(-theta * gap);
  return s.t_x - std::log1p(-u * mass) / theta;
}

double draw_lambda(const Rfm& s, const HyperParams& hp, double exposure, Rng& rng) {
  require(exposure > 0.0, ErrorKind::kInvalidArgument, "exposure must be positive");
  return positive(rng.gamma(hp.r + s.x, hp.alpha + exposure));
}

double draw_mu(const Rfm& s, const HyperParams& hp, bool alive,
               std::optional<double> tau, Rng& rng) {
  if (alive) {
    require(!tau.has_value(), ErrorKind::kInvalidArgument,
            "alive customer must not carry a dropout time");
    return positive(rng.gamma(hp.s, hp.beta + s.T));
  }
  require(tau.has_value() && *tau > 0.0, ErrorKind::kInvalidArgument,
          "dead customer needs a positive dropout time");
  return positive(rng.gamma(hp.s + 1.0, hp.beta + *tau));
}

double draw_population_rate(double shape, std::span<const double> values, double a0,
                            double b0, Rng& rng) {
  require(!values.empty(), ErrorKind::kInvalidArgument, "no individual draws");
  double sum = 0.0;
  for (double v : values) {
    require(v > 0.0, ErrorKind::kInvalidArgument, "individual draws must be positive");
    sum += v;
  }
  return positive(rng.gamma(a0 + double(values.size()) * shape, b0 + sum));
}

double log_shape_conditional(double shape, double rate, std::size_t n,
                             double sum_log_values, double a0, double b0) {
  if (!(shape > 0.0) || !std::isfinite(shape)) return kNegInf;
  const double nn = static_cast<double>(n);
  return (a0 - 1.0) * std::log(shape) - b0 * shape +
         nn * (shape * std::log(rate) - std::lgamma(shape)) +
         (shape - 1.0) * sum_log_values;
}

double slice_sample(double x0, const std::function<double(double)>& log_density,
                    double width, Rng& rng, int max_steps) {
  const double f0 = log_density(x0);
  require(std::isfinite(f0), ErrorKind::kDomain,
          "slice sampler started outside the support");
  const double level = f0 + std::log(rng.uniform());

  double lo = x0 - width * rng.uniform();
  double hi = lo + width;
  int left = static_cast<int>(std::floor(max_steps * rng.uniform()));
  int right = max_steps - 1 - left;
  while (left-- > 0 && log_density(lo) > level) lo -= width;
  while (right-- > 0 && log_density(hi) > level) hi += width;

  for (;;) {
    const double x = lo + (hi - lo) * rng.uniform();
    if (log_density(x) > level) return x;
    if (x < x0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo < 1e-300) return x0;
  }
}

double slice_sample_shape(double current, double rate, std::size_t n,
                          double sum_log_values, double a0, double b0, Rng& rng) {
  require(current > 0.0 && rate > 0.0, ErrorKind::kInvalidArgument,
          "shape and rate must be positive");
  // Sample u = ln(shape); the Jacobian adds u to the log density.
  auto log_density = [&](double u) {
    const double k = std::exp(u);
    return log_shape_conditional(k, rate, n, sum_log_values, a0, b0) + u;
  };
  return positive(std::exp(slice_sample(std::log(current), log_density, 1.0, rng)));
}

HyperParams update_hyperparams(std::span<const double> lambdas,
                               std::span<const double> mus, const HyperParams& hp,
                               const ChainConfig& cfg, Rng& rng) {
  require(!lambdas.empty() && lambdas.size() == mus.size(),
          ErrorKind::kInvalidArgument, "need equal, nonempty lambda and mu lists");
  auto sum_log = [](std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) {
      require(x > 0.0, ErrorKind::kInvalidArgument, "rates must be positive");
      acc += std::log(x);
    }
    return acc;
  };
  const double log_lambda = sum_log(lambdas);
  const double log_mu = sum_log(mus);

  HyperParams next = hp;
  next.alpha = draw_population_rate(next.r, lambdas, cfg.a0, cfg.b0, rng);
  next.r = slice_sample_shape(next.r, next.alpha, lambdas.size(), log_lambda, cfg.a0,
                              cfg.b0, rng);
  next.beta = draw_population_rate(next.s, mus, cfg.a0, cfg.b0, rng);
  next.s =
      slice_sample_shape(next.s, next.beta, mus.size(), log_mu, cfg.a0, cfg.b0, rng);
  return next;
}

ChainState initial_state(std::span<const Rfm> data, const ChainConfig& cfg) {
  ChainState st;
  st.hyper = cfg.initial_hyper.value_or(HyperParams{});
  st.params.reserve(data.size());
  for (const auto& s : data) {
    require(s.T > 0.0, ErrorKind::kInvalidArgument,
            "calibration length must be positive for every customer");
    st.params.push_back({(s.x + 1.0) / s.T, 1.0 / s.T});
  }
  st.latent.assign(data.size(), LatentState{});
  return st;
}

void sweep_customers(std::span<const Rfm> data, ChainState& state, std::uint64_t seed,
                     std::uint64_t sweep) {
  const HyperParams hp = state.hyper;
  detail::parallel_for(data.size(), [&](std::size_t i) {
    const Rfm& s = data[i];
    Rng rng(derive_seed(seed, 2 * sweep, i));
    IndividualParams& p = state.params[i];
    LatentState& z = state.latent[i];

    z.alive = draw_alive(s, p, rng.uniform());
    if (z.alive) {
      z.tau = 0.0;
    } else {
      double tau = draw_dropout_time(s, p, rng.uniform());
      if (tau <= s.t_x) tau = std::nextafter(s.t_x, s.T);
      if (tau >= s.T) tau = std::nextafter(s.T, s.t_x);
      z.tau = tau;
    }
    const double exposure = z.alive ? s.T : z.tau;
    p.lambda = draw_lambda(s, hp, exposure, rng);
    p.mu = draw_mu(s, hp, z.alive,
                   z.alive ? std::nullopt : std::optional<double>(z.tau), rng);
  });
}

PosteriorSummary run_chain(const std::vector<CalibrationSummary>& summaries,
                           const ChainConfig& cfg) {
  cfg.validate();
  require(!summaries.empty(), ErrorKind::kInvalidArgument, "no customers to fit");
  std::vector<Rfm> data;
  data.reserve(summaries.size());
  for (const auto& s : summaries) data.push_back(Rfm::of(s));

  ChainState st = initial_state(data, cfg);
  const std::size_t n = data.size();
  std::vector<double> sum_lambda(n, 0.0), sum_mu(n, 0.0);
  std::vector<double> lambdas(n), mus(n);
  HyperParams hyper_sum{0.0, 0.0, 0.0, 0.0};

  PosteriorSummary post;
  for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
    sweep_customers(data, st, cfg.seed, std::uint64_t(sweep));
    if (!cfg.fix_hyperparams) {
      for (std::size_t i = 0; i < n; ++i) {
        lambdas[i] = st.params[i].lambda;
        mus[i] = st.params[i].mu;
      }
      Rng rng(derive_seed(cfg.seed, 2 * std::uint64_t(sweep) + 1, 0));
      st.hyper = update_hyperparams(lambdas, mus, st.hyper, cfg, rng);
    }
    if (sweep >= cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0) {
      for (std::size_t i = 0; i < n; ++i) {
        sum_lambda[i] += st.params[i].lambda;
        sum_mu[i] += st.params[i].mu;
      }
      hyper_sum.r += st.hyper.r;
      hyper_sum.alpha += st.hyper.alpha;
      hyper_sum.s += st.hyper.s;
      hyper_sum.beta += st.hyper.beta;
      if (cfg.keep_traces) post.hyper_trace.push_back(st.hyper);
      ++post.draws_kept;
    }
  }

  const double k = static_cast<double>(post.draws_kept);
  post.customer_ids.reserve(n);
  post.mean_params.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    post.customer_ids.push_back(summaries[i].customer_id);
    post.mean_params.push_back({sum_lambda[i] / k, sum_mu[i] / k});
  }
  post.mean_hyper = {hyper_sum.r / k, hyper_sum.alpha / k, hyper_sum.s / k,
                     hyper_sum.beta / k};
  return post;
}

void write_labels_csv(const std::vector<std::string>& ids,
                      const std::vector<IndividualParams>& params,
                      const std::filesystem::path& path) {
  require(ids.size() == params.size(), ErrorKind::kInvalidArgument,
          "label id/parameter count mismatch");
  auto out = detail::open_out(path);
  out << "customer_id,lambda,mu\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << ',' << detail::fmt(params[i].lambda) << ','
        << detail::fmt(params[i].mu) << '\n';
  }
}

void read_labels_csv(const std::filesystem::path& path, std::vector<std::string>& ids,
                     std::vector<IndividualParams>& params) {
  auto in = detail::open_in(path);
  std::string line;
  require(std::getline(in, line) && detail::trim(line) == "customer_id,lambda,mu",
          ErrorKind::kParse, detail::where(path, 1) + ": expected customer_id,lambda,mu");
  ids.clear();
  params.clear();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    IndividualParams p;
    require(f.size() == 3 && detail::try_double(f[1], p.lambda) &&
                detail::try_double(f[2], p.mu) && p.lambda > 0.0 && p.mu > 0.0,
            ErrorKind::kParse, detail::where(path, line_no) + ": malformed label row");
    ids.emplace_back(f[0]);
    params.push_back(p);
  }
}

void write_trace_csv(const PosteriorSummary& post, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "draw,r,alpha,s,beta\n";
  for (std::size_t i = 0; i < post.hyper_trace.size(); ++i) {
    const auto& h = post.hyper_trace[i];
    out << i << ',' << detail::fmt(h.r) << ',' << detail::fmt(h.alpha) << ','
        << detail::fmt(h.s) << ',' << detail::fmt(h.beta) << '\n';
  }
}

}  // namespace btydnn
