#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls into the library's math.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Real = long double;

namespace detail {

inline Real simpson(Real a, Real fa, Real b, Real fb, Real fm) {
  return (b - a) / 6 * (fa + 4 * fm + fb);
}

inline Real adapt(const std::function<Real(Real)>& f, Real a, Real fa, Real b, Real fb, Real m,
                  Real fm, Real whole, Real tol, int depth) {
  const Real lm = (a + m) / 2, rm = (m + b) / 2;
  const Real flm = f(lm), frm = f(rm);
  const Real left = simpson(a, fa, m, fm, flm);
  const Real right = simpson(m, fm, b, fb, frm);
  const Real delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15 * tol) return left + right + delta / 15;
  return adapt(f, a, fa, m, fm, lm, flm, left, tol / 2, depth - 1) +
         adapt(f, m, fm, b, fb, rm, frm, right, tol / 2, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with absolute tolerance `tol`.
inline Real integrate(const std::function<Real(Real)>& f, Real a, Real b, Real tol,
                      int max_depth = 60) {
  if (!(b > a)) return 0;
  const Real m = (a + b) / 2;
  const Real fa = f(a), fb = f(b), fm = f(m);
  const Real whole = detail::simpson(a, fa, b, fb, fm);
  return detail::adapt(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

// Likelihood of (x, t_x, T) under (lambda, mu) as death-time integral plus
// survival term:
//   int_{t_x}^{T} lambda^x mu e^{-(lambda+mu) tau} dtau + lambda^x e^{-(lambda+mu) T}.
// Returned as a log, with lambda^x e^{-theta t_x} factored out so the
// quadrature works on O(1) values.
inline Real log_likelihood_quadrature(Real x, Real t_x, Real T, Real lambda, Real mu) {
  const Real theta = lambda + mu;
  const auto death = [&](Real tau) { return mu * std::exp(-theta * (tau - t_x)); };
  const Real scale_ref = std::max(mu * (T - t_x), Real(1e-300));
  const Real integral = integrate(death, t_x, T, scale_ref * 1e-16L);
  const Real survival = std::exp(-theta * (T - t_x));
  return x * std::log(lambda) - theta * t_x + std::log(integral + survival);
}

// Survival share of the likelihood, i.e. P(alive at T | data).
inline Real p_alive_quadrature(Real x, Real t_x, Real T, Real lambda, Real mu) {
  const Real theta = lambda + mu;
  const Real log_surv = x * std::log(lambda) - theta * T;
  return std::exp(log_surv - log_likelihood_quadrature(x, t_x, T, lambda, mu));
}

// Two-sided one-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = double(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - double(i) / n, double(i + 1) / n - f});
  }
  return d;
}

// Asymptotic 1% critical value of the KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(double(n)); }

// |a - b| relative to max(|a|, |b|, floor).
inline double rel_diff(double a, double b, double floor = 0.0) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

// z-score of a sample mean against its expected value.
inline double mean_z(const std::vector<double>& xs, double expected_mean) {
  const double n = double(xs.size());
  double m = 0.0;
  for (double v : xs) m += v;
  m /= n;
  double var = 0.0;
  for (double v : xs) var += (v - m) * (v - m);
  var /= (n - 1.0);
  return (m - expected_mean) / std::sqrt(var / n);
}

inline double mean(const std::vector<double>& xs) {
  double m = 0.0;
  for (double v : xs) m += v;
  return m / double(xs.size());
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("btydnn_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
