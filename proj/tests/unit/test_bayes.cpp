#include <cmath>
#include <cstdlib>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "btydnn/bayes.hpp"
#include "btydnn/error.hpp"
#include "btydnn/synthetic.hpp"

using namespace btydnn;

namespace {

std::vector<double> draws(int n, auto&& f) {
  std::vector<double> out(n);
  for (auto& v : out) v = f();
  return out;
}

// Batch-means z score for an autocorrelated series.
double batch_z(const std::vector<double>& xs, double expected, int batches = 25) {
  const std::size_t len = xs.size() / batches;
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    double m = 0.0;
    for (std::size_t i = 0; i < len; ++i) m += xs[b * len + i];
    means.push_back(m / double(len));
  }
  return oracle::mean_z(means, expected);
}

std::vector<CalibrationSummary> small_cohort(std::size_t n, std::uint64_t seed) {
  const auto params = sample_population(kDefaultSyntheticHyper, n, seed);
  Rng rng(seed + 1);
  std::vector<CalibrationSummary> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double T = 20.0 + 40.0 * rng.uniform();
    const auto times = simulate_repeat_times(params[i], T, rng);
    out.push_back({"c" + std::to_string(i), long(times.size()),
                   times.empty() ? 0.0 : times.back(), T, {}, 0});
  }
  return out;
}

struct EnvThreads {
  explicit EnvThreads(const char* v) { setenv("BTYD_THREADS", v, 1); }
  ~EnvThreads() { unsetenv("BTYD_THREADS"); }
};

}  // namespace

TEST_CASE("draw_alive") {
  // With t_x = T the survival share is 1, so every draw is alive.
  CHECK(draw_alive(Rfm{2, 10, 10}, {3, 1}, 0.74));
  CHECK(draw_alive(Rfm{2, 10, 10}, {3, 1}, 0.76));
  CHECK(draw_alive(Rfm{2, 10, 10}, {3, 1}, 0.999999));
  CHECK(draw_alive(Rfm{2, 1, 40}, {0.2, 1e-15}, 0.999999));

  const Rfm s{2, 30, 52};
  const IndividualParams p{0.1, 0.02};
  const double pa = double(oracle::p_alive_quadrature(2, 30, 52, 0.1L, 0.02L));
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = 100000;
  int alive = 0;
  for (int i = 0; i < n; ++i) alive += draw_alive(s, p, unif(gen));
  const double se = std::sqrt(pa * (1 - pa) / n);
  CHECK(std::fabs(double(alive) / n - pa) < 3 * se);
}

TEST_CASE("draw_dropout_time") {
  const Rfm s{2, 30, 52};
  const IndividualParams p{0.1, 0.02};
  CHECK(draw_dropout_time(s, p, 0.0) == doctest::Approx(30.0));
  CHECK(draw_dropout_time(s, p, 1.0) == doctest::Approx(52.0));
  CHECK(draw_dropout_time(s, {1e-15, 1e-15}, 0.5) == doctest::Approx(41.0));
  try {
    (void)draw_dropout_time(Rfm{1, 10, 10}, p, 0.3);
    FAIL("t_x = T accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kState);
  }

  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double theta = 0.12, gap = 22.0;
  auto taus = draws(100000, [&] { return draw_dropout_time(s, p, unif(gen)); });
  for (double t : taus) {
    REQUIRE(t > 30.0);
    REQUIRE(t < 52.0);
  }
  const auto cdf = [&](double t) {
    return std::expm1(-theta * (t - 30.0)) / std::expm1(-theta * gap);
  };
  CHECK(oracle::ks_statistic(taus, cdf) < oracle::ks_critical_1pct(taus.size()));
}

TEST_CASE("draw_lambda and draw_mu moments") {
  Rng rng(21);
  const HyperParams unit{1, 1, 1, 0};
  auto a = draws(100000, [&] { return draw_lambda(Rfm{0, 0, 1}, unit, 1.0, rng); });
  CHECK(oracle::rel_diff(oracle::mean(a), 0.5) < 0.02);
  auto b = draws(100000, [&] {
    return draw_lambda(Rfm{10, 40, 52}, HyperParams{0.5, 10, 1, 1}, 52.0, rng);
  });
  CHECK(oracle::rel_diff(oracle::mean(b), 10.5 / 62) < 0.02);
  CHECK(std::fabs(oracle::mean_z(b, 10.5 / 62)) < 4);

  auto c = draws(100000, [&] { return draw_mu(Rfm{1, 5, 10}, unit, true, std::nullopt, rng); });
  CHECK(oracle::rel_diff(oracle::mean(c), 0.1) < 0.02);
  auto d = draws(100000, [&] { return draw_mu(Rfm{1, 3, 10}, unit, false, 5.0, rng); });
  CHECK(oracle::rel_diff(oracle::mean(d), 0.4) < 0.02);
  // Death adds one to the shape: variance (s+1)/rate^2 = 2/25.
  double var = 0.0;
  for (double v : d) var += (v - 0.4) * (v - 0.4);
  CHECK(oracle::rel_diff(var / double(d.size()), 2.0 / 25) < 0.05);

  CHECK_THROWS_AS((void)draw_lambda(Rfm{0, 0, 1}, unit, 0.0, rng), Error);
  CHECK_THROWS_AS((void)draw_mu(Rfm{1, 3, 10}, unit, true, 5.0, rng), Error);
  CHECK_THROWS_AS((void)draw_mu(Rfm{1, 3, 10}, unit, false, std::nullopt, rng), Error);
}

TEST_CASE("population rate draws") {
  Rng rng(5);
  const std::vector<double> ones{1.0, 1.0};
  auto a = draws(100000, [&] { return draw_population_rate(1.0, ones, 1e-3, 1e-3, rng); });
  CHECK(oracle::rel_diff(oracle::mean(a), 2.001 / 2.001) < 0.02);

  // With b0 = 0 the rate draw scales exactly by 1/c.
  const std::vector<double> lam{0.3, 1.7, 0.05, 2.2};
  std::vector<double> scaled;
  for (double v : lam) scaled.push_back(3.5 * v);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng r1(seed), r2(seed);
    const double base = draw_population_rate(0.8, lam, 1e-3, 0.0, r1);
    const double sc = draw_population_rate(0.8, scaled, 1e-3, 0.0, r2);
    CHECK(oracle::rel_diff(sc * 3.5, base) < 1e-12);
  }
  const std::vector<double> bad{1.0, -1.0};
  CHECK_THROWS_AS((void)draw_population_rate(1.0, bad, 1e-3, 1e-3, rng), Error);
  CHECK_THROWS_AS((void)draw_population_rate(1.0, std::vector<double>{}, 1e-3, 1e-3, rng),
                  Error);
  ChainConfig cfg;
  CHECK_THROWS_AS((void)update_hyperparams(bad, ones, HyperParams{}, cfg, rng), Error);
}

TEST_CASE("shape slice sampler matches grid density") {
  std::mt19937_64 gen(12);
  std::gamma_distribution<double> g(1.5, 0.5);
  const std::size_t n = 50;
  double sum_log = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum_log += std::log(g(gen));
  const double rate = 2.0, a0 = 1e-3, b0 = 1e-3;

  // Dense grid of the unnormalized conditional.
  const int m = 200000;
  const double hi = 15.0, dk = hi / m;
  std::vector<double> logs(m);
  double peak = -1e300;
  for (int i = 0; i < m; ++i) {
    logs[i] = log_shape_conditional((i + 0.5) * dk, rate, n, sum_log, a0, b0);
    peak = std::max(peak, logs[i]);
  }
  double z = 0.0, m1 = 0.0;
  std::vector<double> cdf(m);
  for (int i = 0; i < m; ++i) {
    const double w = std::exp(logs[i] - peak);
    z += w;
    m1 += w * (i + 0.5) * dk;
    cdf[i] = z;
  }
  const double grid_mean = m1 / z;

  Rng rng(99);
  std::vector<double> chain;
  double k = 1.0;
  for (int i = 0; i < 200000; ++i) {
    k = slice_sample_shape(k, rate, n, sum_log, a0, b0, rng);
    chain.push_back(k);
  }
  CHECK(std::fabs(batch_z(chain, grid_mean)) < 4);
  // Decile occupancy against the grid CDF.
  for (int dec = 1; dec < 10; ++dec) {
    const double target = dec / 10.0;
    int idx = 0;
    while (cdf[idx] / z < target) ++idx;
    const double q = (idx + 0.5) * dk;
    double below = 0.0;
    for (double v : chain) below += v < q;
    CHECK(std::fabs(below / double(chain.size()) - target) < 0.01);
  }
}

TEST_CASE("run_chain: single customer with no information returns the prior mean") {
  ChainConfig cfg;
  cfg.sweeps = 40000;
  cfg.burn_in = 10;
  cfg.thin = 1;
  cfg.seed = 4;
  cfg.fix_hyperparams = true;
  cfg.initial_hyper = HyperParams{0.5, 10.0, 0.4, 20.0};
  std::vector<CalibrationSummary> one{{"a", 0, 0.0, 1e-6, {}, 0}};
  const auto post = run_chain(one, cfg);
  const double prior = 0.05, se = std::sqrt(0.5) / 10.0 / std::sqrt(40000.0);
  CHECK(std::fabs(post.mean_params[0].lambda - prior) < 4 * se);
}

TEST_CASE("run_chain determinism, thread independence and positivity") {
  const auto cohort = small_cohort(150, 31);
  ChainConfig cfg;
  cfg.sweeps = 300;
  cfg.burn_in = 100;
  cfg.thin = 2;
  cfg.seed = 77;
  cfg.keep_traces = true;
  const auto a = run_chain(cohort, cfg);
  const auto b = run_chain(cohort, cfg);
  PosteriorSummary c;
  {
    EnvThreads env("4");
    c = run_chain(cohort, cfg);
  }
  REQUIRE(a.mean_params.size() == cohort.size());
  CHECK(a.draws_kept == 100);
  CHECK(a.hyper_trace.size() == 100);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    CHECK(a.mean_params[i].lambda == b.mean_params[i].lambda);
    CHECK(a.mean_params[i].mu == b.mean_params[i].mu);
    CHECK(a.mean_params[i].lambda == c.mean_params[i].lambda);
    CHECK(a.mean_params[i].mu == c.mean_params[i].mu);
    CHECK(a.mean_params[i].lambda > 0.0);
    CHECK(a.mean_params[i].mu > 0.0);
    CHECK(std::isfinite(a.mean_params[i].lambda));
  }
  CHECK(a.mean_hyper.r == c.mean_hyper.r);
  CHECK(a.mean_hyper.beta == c.mean_hyper.beta);
  for (const auto& h : a.hyper_trace) {
    CHECK(h.r > 0);
    CHECK(h.alpha > 0);
    CHECK(h.s > 0);
    CHECK(h.beta > 0);
  }
  cfg.seed = 78;
  CHECK(run_chain(cohort, cfg).mean_params[0].lambda != a.mean_params[0].lambda);

  ChainConfig bad = cfg;
  bad.burn_in = bad.sweeps;
  CHECK_THROWS_AS((void)run_chain(cohort, bad), Error);
  CHECK_THROWS_AS((void)run_chain({}, cfg), Error);
}

TEST_CASE("every individual draw stays positive over a sweep sequence") {
  const auto cohort = small_cohort(100, 3);
  std::vector<Rfm> data;
  for (const auto& s : cohort) data.push_back(Rfm::of(s));
  ChainConfig cfg;
  auto st = initial_state(data, cfg);
  st.hyper = kDefaultSyntheticHyper;
  for (std::uint64_t k = 0; k < 200; ++k) {
    sweep_customers(data, st, 5, k);
    for (std::size_t i = 0; i < data.size(); ++i) {
      REQUIRE(st.params[i].lambda > 0.0);
      REQUIRE(st.params[i].mu > 0.0);
      if (!st.latent[i].alive) {
        REQUIRE(st.latent[i].tau > data[i].t_x);
        REQUIRE(st.latent[i].tau < data[i].T);
      }
    }
  }
}

TEST_CASE("joint distribution check: successive-conditional vs prior moments") {
  // Alternate data | params and params | data with hyperparameters fixed. The
  // marginal of lambda must stay Gamma(r, alpha).
  const HyperParams hp{2.0, 20.0, 1.5, 30.0};
  const std::size_t n = 200;
  const double T = 52.0;
  auto params = sample_population(hp, n, 123);
  ChainState st;
  st.params = params;
  st.latent.assign(n, LatentState{});
  st.hyper = hp;
  std::vector<Rfm> data(n);
  std::vector<double> m1, m2, mu1;
  const int iters = 3000;
  for (int it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(derive_seed(555, std::uint64_t(it), i));
      const auto times = simulate_repeat_times(st.params[i], T, rng);
      data[i] = Rfm{double(times.size()), times.empty() ? 0.0 : times.back(), T};
    }
    sweep_customers(data, st, 777, std::uint64_t(it));
    double a = 0.0, b = 0.0, c = 0.0;
    for (const auto& p : st.params) {
      a += p.lambda;
      b += p.lambda * p.lambda;
      c += p.mu;
    }
    m1.push_back(a / n);
    m2.push_back(b / n);
    mu1.push_back(c / n);
  }
  const double e1 = hp.r / hp.alpha, e2 = hp.r * (hp.r + 1) / (hp.alpha * hp.alpha);
  const double z1 = batch_z(m1, e1), z2 = batch_z(m2, e2), z3 = batch_z(mu1, hp.s / hp.beta);
  INFO("z(lambda)=", z1, " z(lambda^2)=", z2, " z(mu)=", z3);
  CHECK(std::fabs(z1) < 4);
  CHECK(std::fabs(z2) < 4);
  CHECK(std::fabs(z3) < 4);
}

TEST_CASE("labels CSV round trip") {
  oracle::TempDir dir("labels");
  const std::vector<std::string> ids{"a", "b"};
  const std::vector<IndividualParams> ps{{0.1234567890123, 0.5}, {2e-9, 3.0}};
  write_labels_csv(ids, ps, dir / "l.csv");
  std::vector<std::string> ids2;
  std::vector<IndividualParams> ps2;
  read_labels_csv(dir / "l.csv", ids2, ps2);
  CHECK(ids2 == ids);
  CHECK(ps2[0].lambda == ps[0].lambda);
  CHECK(ps2[1].lambda == ps[1].lambda);
}
