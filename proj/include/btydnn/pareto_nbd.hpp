#pragma once

#include "btydnn/data_pipeline.hpp"

namespace btydnn {

// Individual-level purchase rate and dropout hazard, both per week.
struct IndividualParams {
  double lambda = 0.0;
  double mu = 0.0;
};

// Lower bound applied to estimates at API boundaries (never inside the math).
inline constexpr double kMinRate = 1e-10;

IndividualParams clamp_rates(IndividualParams p);

// The three sufficient statistics; convertible from a CalibrationSummary.
struct Rfm {
  double x = 0.0;
  double t_x = 0.0;
  double T = 0.0;

  static Rfm of(const CalibrationSummary& s) {
    return {static_cast<double>(s.x), s.t_x, s.T};
  }
};

struct LogLikGradient {
  double d_lambda = 0.0;
  double d_mu = 0.0;
};

// log L(x, t_x, T | lambda, mu)
//   = x ln(lambda) - ln(lambda + mu)
//     + ln(mu e^{-(lambda+mu) t_x} + lambda e^{-(lambda+mu) T}),
// evaluated with the larger exponent factored out of the sum.
double log_likelihood(const Rfm& s, const IndividualParams& p);
LogLikGradient grad_log_likelihood(const Rfm& s, const IndividualParams& p);

// Probability of being alive at T given the calibration data: the survival
// contribution lambda^x e^{-(lambda+mu) T} divided by the likelihood, i.e.
//   1 / (1 + mu / (lambda + mu) * (e^{(lambda+mu)(T - t_x)} - 1)).
// Equals 1 when t_x = T.
double p_alive(const Rfm& s, const IndividualParams& p);

// p_alive * (lambda / mu) * (1 - e^{-mu h}).
double expected_holdout_purchases(const Rfm& s, const IndividualParams& p,
                                  double horizon_weeks);

inline double log_likelihood(const CalibrationSummary& s, const IndividualParams& p) {
  return log_likelihood(Rfm::of(s), p);
}
inline LogLikGradient grad_log_likelihood(const CalibrationSummary& s,
                                          const IndividualParams& p) {
  return grad_log_likelihood(Rfm::of(s), p);
}
inline double p_alive(const CalibrationSummary& s, const IndividualParams& p) {
  return p_alive(Rfm::of(s), p);
}
inline double expected_holdout_purchases(const CalibrationSummary& s,
                                         const IndividualParams& p, double h) {
  return expected_holdout_purchases(Rfm::of(s), p, h);
}

}  // namespace btydnn
