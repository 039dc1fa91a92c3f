#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "btydnn/error.hpp"
#include "btydnn/network.hpp"

using namespace btydnn;

namespace {

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

NetworkSpec micro_spec() {
  NetworkSpec s;
  s.input_dim = 1;
  s.hidden_layers = 1;
  s.hidden_width = 1;
  s.dropout_p = 0.0;
  return s;
}

NetworkWeights micro_weights() {
  NetworkWeights w;
  w.layers.push_back({1, 1, {0.5}, {-0.2}});
  w.layers.push_back({1, 2, {1.5, -2.0}, {0.1, 0.3}});
  return w;
}

// 16 samples with data-scaled labels, as the chain would produce.
std::vector<TrainingSample> fd_batch(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> len(2.0, 60.0), frac(0.0, 1.0), lab(0.3, 2.5);
  std::uniform_int_distribution<int> cnt(0, 8);
  std::vector<TrainingSample> out;
  for (int i = 0; i < 16; ++i) {
    const double T = len(gen);
    const Rfm r{double(cnt(gen)), 0.0, T};
    Rfm rr = r;
    if (rr.x > 0) rr.t_x = frac(gen) * T;
    const double jitter = lab(gen);
    out.push_back(make_training_sample({z(gen), z(gen), z(gen)}, rr,
                                       {jitter * (rr.x + 0.5) / T, 0.5 / (T - rr.t_x + 5.0)}));
  }
  return out;
}

// Loss with weights perturbed: `which` indexes the flattened weights+biases.
double& param_ref(NetworkWeights& w, std::size_t which) {
  for (auto& l : w.layers) {
    if (which < l.weights.size()) return l.weights[which];
    which -= l.weights.size();
    if (which < l.bias.size()) return l.bias[which];
    which -= l.bias.size();
  }
  throw std::out_of_range("parameter index");
}

double eval_loss(std::span<const TrainingSample> b, const NetworkWeights& w,
                 const NetworkSpec& spec, const LossConfig& cfg, Mode mode,
                 std::uint64_t mask_seed) {
  Rng rng(mask_seed);
  return loss_gradient(b, w, spec, cfg, mode, &rng).loss;
}

// Returns the number of parameters whose analytic gradient misses the
// central difference (step 1e-5) by more than rel 1e-4.
int fd_mismatches(const LossConfig& cfg, Mode mode, double dropout) {
  NetworkSpec spec;
  spec.dropout_p = dropout;
  const auto batch = fd_batch(3);
  NetworkWeights w = init_weights(spec, 17);
  for (auto& l : w.layers)
    for (auto& b : l.bias) b = 0.05;
  Rng rng(101);
  const auto lg = loss_gradient(std::span<const TrainingSample>(batch), w, spec, cfg, mode, &rng);
  const std::size_t n = w.parameter_count();
  Gradients g = lg.grad;
  double gmax = 0.0;
  for (std::size_t k = 0; k < n; ++k) gmax = std::max(gmax, std::fabs(param_ref(g, k)));
  int bad = 0;
  for (std::size_t k = 0; k < n; ++k) {
    NetworkWeights wp = w, wm = w;
    const double h = 1e-5;
    param_ref(wp, k) += h;
    param_ref(wm, k) -= h;
    const double fd = (eval_loss(batch, wp, spec, cfg, mode, 101) -
                       eval_loss(batch, wm, spec, cfg, mode, 101)) /
                      (2 * h);
    // Floor for gradients that are zero up to roundoff.
    if (oracle::rel_diff(param_ref(g, k), fd, 1e-6 * std::max(gmax, 1.0)) > 1e-4) ++bad;
  }
  return bad;
}

std::vector<CalibrationSummary> toy_summaries(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> len(5.0, 70.0), frac(0.0, 1.0);
  std::uniform_int_distribution<int> cnt(0, 10);
  std::vector<CalibrationSummary> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double T = len(gen);
    const long x = cnt(gen);
    out.push_back({"c" + std::to_string(i), x, x ? frac(gen) * T : 0.0, T, {}, 0});
  }
  return out;
}

std::vector<IndividualParams> toy_labels(const std::vector<CalibrationSummary>& s) {
  std::vector<IndividualParams> out;
  for (const auto& c : s) out.push_back({(c.x + 0.5) / c.T, 0.5 / (c.T - c.t_x + 5.0)});
  return out;
}

}  // namespace

TEST_CASE("init_weights") {
  NetworkSpec spec;
  const auto a = init_weights(spec, 9), b = init_weights(spec, 9);
  CHECK(a == b);
  CHECK_FALSE(a == init_weights(spec, 10));
  REQUIRE(a.layers.size() == 3);
  CHECK(a.parameter_count() == 3 * 20 + 20 + 20 * 20 + 20 + 20 * 2 + 2);
  for (const auto& l : a.layers) {
    const double bound = std::sqrt(6.0 / double(l.in + l.out));
    for (double v : l.weights) CHECK(std::fabs(v) <= bound);
    for (double v : l.bias) CHECK(v == 0.0);
  }
  // Moment check on 10^4 entries of the 20x20 layer (uniform on +-bound).
  std::vector<double> entries;
  for (std::uint64_t seed = 0; entries.size() < 10000; ++seed) {
    const auto w = init_weights(spec, seed);
    for (double v : w.layers[1].weights) entries.push_back(v);
  }
  const double bound = std::sqrt(6.0 / 40.0);
  const double se = bound / std::sqrt(3.0) / std::sqrt(double(entries.size()));
  CHECK(std::fabs(oracle::mean(entries)) < 3 * se);
}

TEST_CASE("forward") {
  NetworkSpec spec;
  auto w = zeros_like(init_weights(spec, 1));
  for (auto f : {std::vector<double>{0, 0, 0}, std::vector<double>{5, -3, 100}}) {
    const auto p = forward(f, w, spec, Mode::kInfer);
    CHECK(p.lambda == 1.0);
    CHECK(p.mu == 1.0);
  }
  const auto wi = init_weights(spec, 4);
  const std::vector<double> f{0.3, -1.2, 0.7};
  const auto p1 = forward(f, wi, spec, Mode::kInfer), p2 = forward(f, wi, spec, Mode::kInfer);
  CHECK(p1.lambda == p2.lambda);
  CHECK(p1.mu == p2.mu);
  CHECK_THROWS_AS((void)forward(std::vector<double>{1, 2}, wi, spec, Mode::kInfer), Error);
  CHECK_THROWS_AS((void)forward(f, wi, spec, Mode::kTrain, nullptr), Error);

  // Micro network by hand: h = sig(0.5*2 - 0.2), lambda = e^{1.5h+0.1}, mu = e^{-2h+0.3}.
  const double h = sig(0.8);
  const auto m = forward(std::vector<double>{2.0}, micro_weights(), micro_spec(), Mode::kInfer);
  CHECK(h == doctest::Approx(0.6899744811276125));
  CHECK(m.lambda == doctest::Approx(std::exp(1.5 * h + 0.1)).epsilon(1e-14));
  CHECK(m.mu == doctest::Approx(std::exp(-2.0 * h + 0.3)).epsilon(1e-14));

  // Positivity survives extreme pre-activations.
  auto big = init_weights(spec, 2);
  for (auto& v : big.layers.back().bias) v = -1e6;
  const auto tiny = forward(f, big, spec, Mode::kInfer);
  CHECK(tiny.lambda > 0.0);
  CHECK(tiny.lambda == doctest::Approx(std::exp(-30.0)));
}

TEST_CASE("inverted dropout keeps the expected activation") {
  NetworkSpec spec;
  const auto w = init_weights(spec, 8);
  const std::vector<double> f{0.4, -0.9, 1.3};
  ForwardCache ref;
  (void)forward(f, w, spec, Mode::kInfer, nullptr, &ref);
  std::vector<double> acc(20, 0.0);
  Rng rng(12);
  ForwardCache c;
  const int passes = 100000;
  for (int i = 0; i < passes; ++i) {
    (void)forward(f, w, spec, Mode::kTrain, &rng, &c);
    for (int j = 0; j < 20; ++j) acc[j] += c.inputs[1][j];
  }
  for (int j = 0; j < 20; ++j) CHECK(oracle::rel_diff(acc[j] / passes, ref.sigmoid[0][j]) < 0.01);
}

TEST_CASE("losses on hand values") {
  const Rfm zero{0, 0, 0};
  LossConfig nll{LossKind::kNll};
  for (double l : {0.01, 1.0, 9.0}) {
    const LossSample s{zero, {1, 1}, {l, 0.2}};
    CHECK(loss(std::span(&s, 1), nll) == doctest::Approx(0.0));
  }
  const LossSample same{Rfm{2, 3, 9}, {0.4, 0.1}, {0.4, 0.1}};
  CHECK(loss(std::span(&same, 1), LossConfig{LossKind::kMse}) == 0.0);
  CHECK(loss(std::span(&same, 1), LossConfig{LossKind::kMae}) == 0.0);

  // NLL_MSE on two points: quadrature NLL plus hand squared penalties.
  const std::vector<LossSample> two{{Rfm{2, 30, 52}, {0.12, 0.03}, {0.1, 0.02}},
                                    {Rfm{0, 0, 10}, {0.05, 0.1}, {0.2, 0.05}}};
  const double q1 = double(oracle::log_likelihood_quadrature(2, 30, 52, 0.1L, 0.02L));
  const double q2 = double(oracle::log_likelihood_quadrature(0, 0, 10, 0.2L, 0.05L));
  const double pen1 = 0.02 * 0.02 + 0.01 * 0.01, pen2 = 0.15 * 0.15 + 0.05 * 0.05;
  CHECK(loss(two, LossConfig{LossKind::kNllMse}) ==
        doctest::Approx((-q1 + pen1 - q2 + pen2) / 2).epsilon(1e-9));
  CHECK(loss(two, LossConfig{LossKind::kNllMae}) ==
        doctest::Approx((-q1 + 0.03 - q2 + 0.2) / 2).epsilon(1e-9));

  // Ratio forms: prediction equal to label gives ratio 1 / log-ratio 0.
  const LossSample eq{Rfm{2, 30, 52}, {0.1, 0.02}, {0.1, 0.02}};
  CHECK(loss(std::span(&eq, 1), LossConfig{LossKind::kRatio}) == doctest::Approx(-1.0));
  CHECK(loss(std::span(&eq, 1), LossConfig{LossKind::kRatio, RatioInterpretation::kAbsLogRatio}) ==
        doctest::Approx(0.0));
  const LossSample neq{Rfm{2, 30, 52}, {0.12, 0.03}, {0.1, 0.02}};
  const double ql = double(oracle::log_likelihood_quadrature(2, 30, 52, 0.12L, 0.03L));
  CHECK(loss(std::span(&neq, 1), LossConfig{LossKind::kRatio}) ==
        doctest::Approx(-std::exp(q1 - ql)).epsilon(1e-9));
  CHECK(loss(std::span(&neq, 1),
             LossConfig{LossKind::kRatioMae, RatioInterpretation::kAbsLogRatio}) ==
        doctest::Approx(std::fabs(q1 - ql) + 0.03).epsilon(1e-9));

  const LossSample badp{Rfm{1, 1, 2}, {0.1, 0.1}, {0.0, 0.1}};
  CHECK_THROWS_AS((void)loss(std::span(&badp, 1), nll), Error);
  CHECK_THROWS_AS((void)loss(std::span<const LossSample>{}, nll), Error);
}

TEST_CASE("loss decomposition holds pointwise") {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> r(0.01, 2.0), len(1, 50), frac(0, 1);
  for (int i = 0; i < 200; ++i) {
    const double T = len(gen);
    const LossSample s{Rfm{3, frac(gen) * T, T}, {r(gen), r(gen)}, {r(gen), r(gen)}};
    auto v = [&](LossKind k, RatioInterpretation ri = RatioInterpretation::kWeightedNll) {
      return loss(std::span(&s, 1), LossConfig{k, ri});
    };
    // Compared on the scale of the larger term; the ratio can reach e^30.
    auto same = [](double combined, double a, double b) {
      return std::fabs(combined - (a + b)) <= 1e-12 * std::max({std::fabs(a), std::fabs(b), 1.0});
    };
    for (auto ri : {RatioInterpretation::kWeightedNll, RatioInterpretation::kAbsLogRatio}) {
      CHECK(same(v(LossKind::kNllMse), v(LossKind::kNll), v(LossKind::kMse)));
      CHECK(same(v(LossKind::kNllMae), v(LossKind::kNll), v(LossKind::kMae)));
      CHECK(same(v(LossKind::kRatioMse, ri), v(LossKind::kRatio, ri), v(LossKind::kMse)));
      CHECK(same(v(LossKind::kRatioMae, ri), v(LossKind::kRatio, ri), v(LossKind::kMae)));
    }
  }
}

TEST_CASE("loss_gradient matches finite differences for every loss kind") {
  for (auto kind : kAllLossKinds) {
    for (auto ri : {RatioInterpretation::kWeightedNll, RatioInterpretation::kAbsLogRatio}) {
      if (ri == RatioInterpretation::kAbsLogRatio && !(kind == LossKind::kRatio ||
                                                       kind == LossKind::kRatioMse ||
                                                       kind == LossKind::kRatioMae))
        continue;
      const LossConfig cfg{kind, ri};
      CAPTURE(loss_kind_name(kind));
      CAPTURE(ratio_interpretation_name(ri));
      CHECK(fd_mismatches(cfg, Mode::kInfer, 0.2) == 0);
      // Same masks on every evaluation: the gradient is exact for the masked network.
      CHECK(fd_mismatches(cfg, Mode::kTrain, 0.2) == 0);
    }
  }
}

TEST_CASE("gradient linearity and MSE stationary point") {
  NetworkSpec spec;
  spec.dropout_p = 0.0;
  const auto w = init_weights(spec, 3);
  auto batch = fd_batch(9);
  auto grad = [&](LossKind k) {
    return loss_gradient(std::span<const TrainingSample>(batch), w, spec, LossConfig{k},
                         Mode::kInfer, nullptr)
        .grad;
  };
  const auto a = grad(LossKind::kNll), b = grad(LossKind::kMse), c = grad(LossKind::kNllMse);
  for (std::size_t l = 0; l < c.layers.size(); ++l)
    for (std::size_t k = 0; k < c.layers[l].weights.size(); ++k)
      CHECK(c.layers[l].weights[k] ==
            doctest::Approx(a.layers[l].weights[k] + b.layers[l].weights[k]).epsilon(1e-10));

  // Labels set to the network's own outputs: the MSE gradient vanishes.
  for (auto& s : batch) s.label = forward(s.features, w, spec, Mode::kInfer);
  const auto z = grad(LossKind::kMse);
  for (const auto& l : z.layers) {
    for (double v : l.weights) CHECK(v == 0.0);
    for (double v : l.bias) CHECK(v == 0.0);
  }
}

TEST_CASE("feature scaler") {
  const std::vector<std::vector<double>> rows{{1, 10}, {3, 10.5}, {5, 11}};
  const auto sc = FeatureScaler::fit(rows);
  CHECK(sc.mean[0] == doctest::Approx(3.0));
  CHECK(sc.stddev[0] == doctest::Approx(std::sqrt(8.0 / 3.0)));
  const auto t = sc.transform(rows[2]);
  CHECK(t[0] == doctest::Approx(2.0 / std::sqrt(8.0 / 3.0)));
  const std::vector<std::vector<double>> flat{{1, 2}, {1, 3}};
  CHECK_THROWS_AS((void)FeatureScaler::fit(flat), Error);
  CHECK_THROWS_AS((void)sc.transform(std::vector<double>{1.0}), Error);
}

TEST_CASE("train: zero epochs, determinism, overfitting") {
  const auto s = toy_summaries(200, 1);
  const auto y = toy_labels(s);
  NetworkSpec spec;
  TrainingConfig cfg;
  cfg.batch_size = 32;
  cfg.seed = 5;

  cfg.epochs = 0;
  const auto m0 = train(s, y, spec, cfg, LossConfig{LossKind::kNll});
  CHECK(m0.weights == init_weights(m0.spec, init_seed_for(5)));
  CHECK(m0.history.size() == 1);

  cfg.epochs = 15;
  const auto a = train(s, y, spec, cfg, LossConfig{LossKind::kNllMse});
  const auto b = train(s, y, spec, cfg, LossConfig{LossKind::kNllMse});
  CHECK(a.weights == b.weights);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_loss == b.history[i].val_loss);
  }
  cfg.seed = 6;
  CHECK_FALSE(train(s, y, spec, cfg, LossConfig{LossKind::kNllMse}).weights == a.weights);

  SUBCASE("overfit 32 samples") {
    const auto s32 = toy_summaries(32, 2);
    const auto y32 = toy_labels(s32);
    NetworkSpec nod;
    nod.dropout_p = 0.0;
    TrainingConfig oc;
    oc.epochs = 2000;
    oc.batch_size = 32;
    oc.validation_fraction = 0.0;
    oc.early_stop_patience = 0;
    const auto m = train(s32, y32, nod, oc, LossConfig{LossKind::kMse});
    REQUIRE(m.history.size() == 2001);
    INFO("initial ", m.history.front().train_loss, " final ", m.history.back().train_loss);
    CHECK(m.history.back().train_loss < 0.01 * m.history.front().train_loss);
  }

  SUBCASE("errors") {
    TrainingConfig small = cfg;
    small.batch_size = 500;
    CHECK_THROWS_AS((void)train(s, y, spec, small, LossConfig{}), Error);
    auto flat = s;
    for (auto& c : flat) c.T = 52.0;
    for (auto& c : flat) c.t_x = std::min(c.t_x, 52.0);
    CHECK_THROWS_AS((void)train(flat, y, spec, cfg, LossConfig{}), Error);
    auto wrong = y;
    wrong.pop_back();
    CHECK_THROWS_AS((void)train(s, wrong, spec, cfg, LossConfig{}), Error);
  }
}

TEST_CASE("predict_params: shape, positivity, permutation, round trip") {
  const auto s = toy_summaries(120, 3);
  const auto y = toy_labels(s);
  TrainingConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 5;
  const auto m = train(s, y, NetworkSpec{}, cfg, LossConfig{LossKind::kNll});
  const auto p = predict_params(s, m);
  REQUIRE(p.size() == s.size());
  for (const auto& v : p) {
    CHECK(v.lambda > 0.0);
    CHECK(v.mu > 0.0);
  }
  auto rev = s;
  std::reverse(rev.begin(), rev.end());
  const auto pr = predict_params(rev, m);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(pr[s.size() - 1 - i].lambda == p[i].lambda);

  oracle::TempDir dir("model");
  save_model(m, dir / "m.txt");
  const auto back = load_model(dir / "m.txt");
  CHECK(back.weights == m.weights);
  CHECK(back.scaler == m.scaler);
  CHECK(back.feature_names == m.feature_names);
  CHECK(predict_params(s, back)[7].mu == p[7].mu);

  auto with_cov = s;
  for (auto& c : with_cov) c.covariates = {1.0};
  CHECK_THROWS_AS((void)predict_params(with_cov, m), Error);

  // Micro network widened to three inputs with zero weight on t_x and x; T = 2.
  NetworkSpec ms = micro_spec();
  ms.input_dim = 3;
  NetworkWeights mw = micro_weights();
  mw.layers[0] = {3, 1, {0.5, 0.0, 0.0}, {-0.2}};
  const FeatureScaler unit{{0, 0, 0}, {1, 1, 1}};
  std::vector<CalibrationSummary> one{{"a", 0, 0.0, 2.0, {}, 0}};
  const auto mp = predict_params(one, mw, ms, unit);
  CHECK(mp[0].lambda == doctest::Approx(std::exp(1.5 * sig(0.8) + 0.1)).epsilon(1e-14));
  CHECK(mp[0].mu == doctest::Approx(std::exp(-2.0 * sig(0.8) + 0.3)).epsilon(1e-14));
}
