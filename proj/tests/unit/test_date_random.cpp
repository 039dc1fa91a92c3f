#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "oracles.hpp"

#include "btydnn/date.hpp"
#include "btydnn/error.hpp"
#include "btydnn/random.hpp"

using namespace btydnn;

TEST_CASE("dates parse in both layouts and do day arithmetic") {
  const Date a = Date::parse("19970101");
  const Date b = Date::parse("1997-01-01");
  CHECK(a == b);
  CHECK(a.iso() == "1997-01-01");
  CHECK(a.compact() == "19970101");
  CHECK(Date::parse("1998-06-30") - a == 545);
  CHECK(a.plus_days(272).iso() == "1997-09-30");
  CHECK(Date::parse("2000-03-01") - Date::parse("2000-02-28") == 2);  // leap year
  CHECK(weeks_between(a, a.plus_days(70)) == doctest::Approx(10.0));
}

TEST_CASE("malformed dates are parse errors") {
  for (const char* bad : {"1997013", "1997-13-01", "19970230", "abcdefgh", "", "1997-1-1"}) {
    CAPTURE(bad);
    try {
      (void)Date::parse(bad);
      FAIL("accepted a bad date");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kParse);
    }
  }
}

TEST_CASE("derived seeds are deterministic and distinct") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2, 3) == derive_seed(derive_seed(1, 2), 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 50; ++a) {
    for (std::uint64_t b = 0; b < 50; ++b) seen.insert(derive_seed(7, a, b));
  }
  CHECK(seen.size() == 2500);
}

TEST_CASE("rng streams replay and uniforms stay in the open interval") {
  Rng a(11), b(11), c(12);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a();
    CHECK(x == b());
    differs |= x != c();
  }
  CHECK(differs);
  Rng r(3);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
}

TEST_CASE("bounded integers are uniform") {
  Rng r(5);
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[r.below(6)];
  // chi-square with 5 dof; 1% critical value 15.09
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 6.0) * (c - n / 6.0) / (n / 6.0);
  CHECK(chi2 < 15.09);
}

TEST_CASE("gamma draws match shape/rate moments, including shape < 1") {
  for (auto [shape, rate] : {std::pair{0.3, 2.0}, {1.0, 1.0}, {4.5, 0.5}, {50.0, 10.0}}) {
    CAPTURE(shape);
    Rng r(derive_seed(9, std::uint64_t(shape * 10)));
    std::vector<double> xs(100000);
    for (auto& x : xs) x = r.gamma(shape, rate);
    CHECK(std::fabs(oracle::mean_z(xs, shape / rate)) < 2.576);
    CHECK(*std::min_element(xs.begin(), xs.end()) > 0.0);
  }
}

TEST_CASE("exponential and normal draws pass KS") {
  Rng r(21);
  std::vector<double> e(100000), z(100000);
  for (auto& v : e) v = r.exponential(2.0);
  for (auto& v : z) v = r.normal();
  CHECK(oracle::ks_statistic(e, [](double x) { return 1.0 - std::exp(-2.0 * x); }) <
        oracle::ks_critical_1pct(e.size()));
  CHECK(oracle::ks_statistic(z, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }) <
        oracle::ks_critical_1pct(z.size()));
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> a(100);
  std::iota(a.begin(), a.end(), 0);
  std::vector<int> b(a);
  Rng r1(4), r2(4);
  shuffle(std::span<int>(a), r1);
  shuffle(std::span<int>(b), r2);
  CHECK(a == b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> id(100);
  std::iota(id.begin(), id.end(), 0);
  CHECK(sorted == id);
  CHECK(a != id);
}
