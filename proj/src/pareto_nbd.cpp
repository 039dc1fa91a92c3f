#include "btydnn/pareto_nbd.hpp"

#include <algorithm>
#include <cmath>

#include "btydnn/error.hpp"

namespace btydnn {

namespace {

void check(const Rfm& s, const IndividualParams& p) {
  if (!(p.lambda > 0.0) || !(p.mu > 0.0) || !std::isfinite(p.lambda) ||
      !std::isfinite(p.mu)) {
    fail(ErrorKind::kDomain, "lambda and mu must be positive and finite");
  }
  if (!(s.x >= 0.0) || !(s.t_x >= 0.0) || !(s.t_x <= s.T)) {
    fail(ErrorKind::kDomain, "invalid RFM summary (need 0 <= t_x <= T, x >= 0)");
  }
}

// The two mixture terms of the likelihood in log form:
//   death  = ln mu     - (lambda+mu) t_x
//   alive  = ln lambda - (lambda+mu) T
struct Terms {
  double log_death;
  double log_alive;
};

Terms terms(const Rfm& s, const IndividualParams& p) {
  const double theta = p.lambda + p.mu;
  return {std::log(p.mu) - theta * s.t_x, std::log(p.lambda) - theta * s.T};
}

double logistic_of_neg(double q) {  // 1 / (1 + e^q)
  if (q > 0.0) {
    const double e = std::exp(-q);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(q));
}

// Softmax weight of the lambda e^{-(lambda+mu) T} term among the two
// likelihood terms.
double survival_share(const Terms& t) {
  return logistic_of_neg(t.log_death - t.log_alive);
}

// ln(e^y - 1) for y >= 0.
double log_expm1(double y) {
  if (y > 30.0) return y + std::log1p(-std::exp(-y));
  return std::log(std::expm1(y));
}

}  // namespace

IndividualParams clamp_rates(IndividualParams p) {
  p.lambda = std::max(p.lambda, kMinRate);
  p.mu = std::max(p.mu, kMinRate);
  return p;
}

double log_likelihood(const Rfm& s, const IndividualParams& p) {
  check(s, p);
  const Terms t = terms(s, p);
  const double hi = std::max(t.log_death, t.log_alive);
  const double lo = std::min(t.log_death, t.log_alive);
  const double log_sum = hi + std::log1p(std::exp(lo - hi));
  const double x_term = s.x > 0.0 ? s.x * std::log(p.lambda) : 0.0;
  return x_term - std::log(p.lambda + p.mu) + log_sum;
}

LogLikGradient grad_log_likelihood(const Rfm& s, const IndividualParams& p) {
  check(s, p);
  const Terms t = terms(s, p);
  const double w_alive = survival_share(t);
  const double w_death = 1.0 - w_alive;
  const double inv_theta = 1.0 / (p.lambda + p.mu);
  LogLikGradient g;
  g.d_lambda = s.x / p.lambda - inv_theta - w_death * s.t_x +
               w_alive * (1.0 / p.lambda - s.T);
  g.d_mu = -inv_theta + w_death * (1.0 / p.mu - s.t_x) - w_alive * s.T;
  return g;
}

double p_alive(const Rfm& s, const IndividualParams& p) {
  check(s, p);
  // Survival contribution lambda^x e^{-theta T} over the full likelihood:
  //   1 / (1 + (mu / theta) (e^{theta (T - t_x)} - 1)).
  const double theta = p.lambda + p.mu;
  const double gap = theta * (s.T - s.t_x);
  if (gap <= 0.0) return 1.0;
  return logistic_of_neg(std::log(p.mu / theta) + log_expm1(gap));
}

double expected_holdout_purchases(const Rfm& s, const IndividualParams& p,
                                  double horizon_weeks) {
  require(horizon_weeks >= 0.0, ErrorKind::kInvalidArgument,
          "holdout horizon must be nonnegative");
  const double alive = p_alive(s, p);
  const double mh = p.mu * horizon_weeks;
  const double per_alive = mh < 1e-8 ? p.lambda * horizon_weeks
                                     : p.lambda * -std::expm1(-mh) / p.mu;
  return alive * per_alive;
}

}  // namespace btydnn
