#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <filesystem>

#include "epf/linear.hpp"
#include "epf/rng.hpp"

using namespace epf;

namespace {

HourlySeries week_series(int days, HourIndex start = make_hour(2016, 1, 4, 0)) {
  HourlySeries s;
  s.market_id = "A";
  s.start = start;
  for (int i = 0; i < days * kHoursPerDay; ++i) {
    s.prices.push_back(100.0 * (i / kHoursPerDay) + (i % kHoursPerDay));
    s.temperatures.push_back(0.0);
  }
  return s;
}

// KKT subgradient condition for min RSS + lambda*l1: at the optimum,
//   beta_j != 0  =>  |2 X_j' r - lambda*sign(beta_j)| ~ 0
//   beta_j == 0  =>  |2 X_j' r| <= lambda
bool kkt_holds(const Matrix& x, const std::vector<double>& y,
               const std::vector<double>& beta, double lambda, double tol) {
  std::size_t n = x.rows, p = x.cols;
  std::vector<double> r(y);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) r[i] -= x.at(i, j) * beta[j];
  for (std::size_t j = 0; j < p; ++j) {
    double corr = 0.0;
    for (std::size_t i = 0; i < n; ++i) corr += x.at(i, j) * r[i];
    if (beta[j] != 0.0) {
      if (std::abs(2.0 * corr - lambda * (beta[j] > 0 ? 1.0 : -1.0)) > tol)
        return false;
    } else {
      if (std::abs(2.0 * corr) > lambda + tol) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("naive forecast copies the calendar-matched day") {
  HourlySeries s = week_series(21);  // starts on a Monday

  SUBCASE("Tuesday uses the previous day") {
    HourIndex tue = s.start + 8 * kHoursPerDay;  // 2016-01-12, a Tuesday
    REQUIRE(weekday_mon0(tue) == 1);
    auto f = naive_forecast(s, tue);
    for (int h = 0; h < 24; ++h)
      CHECK(f[h] == s.price_at(tue - kHoursPerDay + h));
  }
  SUBCASE("Saturday uses the previous Saturday") {
    HourIndex sat = s.start + 12 * kHoursPerDay;
    REQUIRE(weekday_mon0(sat) == 5);
    auto f = naive_forecast(s, sat);
    for (int h = 0; h < 24; ++h)
      CHECK(f[h] == s.price_at(sat - 7 * kHoursPerDay + h));
  }
  SUBCASE("constant history yields a constant forecast") {
    HourlySeries c = s;
    c.prices.assign(c.prices.size(), 33.0);
    auto f = naive_forecast(c, c.start + 10 * kHoursPerDay);
    for (double v : f) CHECK(v == 33.0);
  }
  SUBCASE("insufficient history is rejected") {
    // day 5 is a Saturday: the rule needs d-7, which precedes the data
    CHECK_THROWS_WITH_AS(naive_forecast(s, s.start + 5 * kHoursPerDay),
                         doctest::Contains("insufficient history"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(naive_forecast(s, s.start),
                         doctest::Contains("insufficient history"),
                         std::runtime_error);
  }
  SUBCASE("only the referenced day matters") {
    HourIndex wed = s.start + 9 * kHoursPerDay;
    REQUIRE(weekday_mon0(wed) == 2);
    auto base = naive_forecast(s, wed);
    HourlySeries perturbed = s;
    for (int d = 0; d < 9; ++d) {
      if (d == 8) continue;  // d-1 is the one day that must stay intact
      for (int h = 0; h < 24; ++h)
        perturbed.prices[d * kHoursPerDay + h] += 1000.0;
    }
    auto again = naive_forecast(perturbed, wed);
    CHECK(base == again);
  }
}

TEST_CASE("one-dimensional lasso solutions match closed forms") {
  SUBCASE("lambda 0 on a single feature is OLS") {
    Matrix x(3, 1);
    x.at(0, 0) = 1.0;
    x.at(1, 0) = 2.0;
    x.at(2, 0) = 3.0;
    std::vector<double> y{2.0, 4.0, 6.0};
    auto res = lasso_cd(x, y, 0.0);
    CHECK(res.beta[0] == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("soft threshold at lambda/2 with unit norm") {
    Matrix x(1, 1);
    x.at(0, 0) = 1.0;
    std::vector<double> y{1.0};  // sum x^2 = 1, sum xy = 1
    auto res = lasso_cd(x, y, 0.001);
    CHECK(std::abs(res.beta[0] - 0.9995) < 1e-12);
  }
  SUBCASE("huge lambda shrinks everything to zero") {
    Rng rng(4);
    Matrix x(10, 3);
    std::vector<double> y(10);
    for (double& v : x.data) v = rng.uniform(-1, 1);
    for (double& v : y) v = rng.uniform(-1, 1);
    auto res = lasso_cd(x, y, 1e9);
    for (double b : res.beta) CHECK(b == 0.0);
  }
}

TEST_CASE("coordinate descent objective never increases") {
  Rng rng(9);
  for (int t = 0; t < 5; ++t) {
    std::size_t n = 12, p = 5;
    Matrix x(n, p);
    std::vector<double> y(n);
    for (double& v : x.data) v = rng.uniform(-2, 2);
    for (double& v : y) v = rng.uniform(-2, 2);
    auto res = lasso_cd(x, y, 0.05);
    for (std::size_t s = 1; s < res.objective_per_sweep.size(); ++s)
      CHECK(res.objective_per_sweep[s] <= res.objective_per_sweep[s - 1] + 1e-12);
  }
}

TEST_CASE("KKT subgradient condition holds on random instances") {
  Rng rng(123);
  for (int t = 0; t < 25; ++t) {
    std::size_t n = 5 + rng.index(16);  // up to 20 samples
    std::size_t p = 1 + rng.index(5);   // up to 5 features
    Matrix x(n, p);
    std::vector<double> y(n);
    for (double& v : x.data) v = rng.uniform(-2, 2);
    for (double& v : y) v = rng.uniform(-2, 2);
    double lambda = rng.uniform(0.001, 1.0);
    auto res = lasso_cd(x, y, lambda);
    CHECK(kkt_holds(x, y, res.beta, lambda, 1e-6));
  }
}

TEST_CASE("stronger penalties give smaller l1 norms") {
  Rng rng(77);
  Matrix x(30, 6);
  std::vector<double> y(30);
  for (double& v : x.data) v = rng.uniform(-1, 1);
  for (double& v : y) v = rng.uniform(-3, 3);
  double prev = -1.0;
  for (double lambda : {2.0, 1.0, 0.5, 0.1, 0.0}) {
    auto res = lasso_cd(x, y, lambda);
    double l1 = 0.0;
    for (double b : res.beta) l1 += std::abs(b);
    if (prev >= 0.0) CHECK(prev <= l1 + 1e-10);
    prev = l1;
  }
}

TEST_CASE("lear_fit on exact linear data recovers the targets") {
  // Targets are linear in two input coordinates; no noise, lambda 0.
  Rng rng(31);
  std::size_t n = 60;
  SampleSet set;
  set.inputs = Matrix(n, 5);
  set.targets = Matrix(n, kHorizon);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 5; ++j) set.inputs.at(i, j) = rng.uniform(-1, 1);
    for (int h = 0; h < kHorizon; ++h)
      set.targets.at(i, h) =
          1.5 * set.inputs.at(i, 0) - 0.7 * set.inputs.at(i, 3) + 0.1 * h;
    set.anchors.push_back(static_cast<HourIndex>(i) * 24);
    set.market_ids.push_back("A");
  }
  LearModel model = lear_fit(set, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto out = lear_forecast(
        model, std::span<const double>(set.inputs.row(i), set.inputs.cols));
    for (int h = 0; h < kHorizon; ++h)
      CHECK(std::abs(out[h] - set.targets.at(i, h)) < 1e-6);
  }
  SUBCASE("dimension mismatch is rejected") {
    std::vector<double> bad(7, 0.0);
    CHECK_THROWS(lear_forecast(model, bad));
  }
}

TEST_CASE("lear with zero coefficients forecasts the intercepts") {
  Rng rng(8);
  std::size_t n = 40;
  SampleSet set;
  set.inputs = Matrix(n, 4);
  set.targets = Matrix(n, kHorizon);
  for (double& v : set.inputs.data) v = rng.uniform(-1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (int h = 0; h < kHorizon; ++h) set.targets.at(i, h) = 5.0 + h;
    set.anchors.push_back(static_cast<HourIndex>(i) * 24);
    set.market_ids.push_back("A");
  }
  LearModel model = lear_fit(set, 1e9);  // full shrinkage
  auto out = lear_forecast(
      model, std::span<const double>(set.inputs.row(0), set.inputs.cols));
  for (int h = 0; h < kHorizon; ++h)
    CHECK(out[h] == doctest::Approx(5.0 + h).epsilon(1e-12));
}

TEST_CASE("lear checkpoint round-trips") {
  Rng rng(3);
  SampleSet set;
  set.inputs = Matrix(30, 4);
  set.targets = Matrix(30, kHorizon);
  for (double& v : set.inputs.data) v = rng.uniform(-1, 1);
  for (double& v : set.targets.data) v = rng.uniform(-1, 1);
  for (std::size_t i = 0; i < 30; ++i) {
    set.anchors.push_back(static_cast<HourIndex>(i) * 24);
    set.market_ids.push_back("A");
  }
  LearModel model = lear_fit(set, 0.01);
  auto path = (std::filesystem::temp_directory_path() / "epf_lear.json").string();
  save_lear_checkpoint(model, path);
  LearModel back = load_lear_checkpoint(path);
  CHECK(back.beta == model.beta);
  CHECK(back.intercept == model.intercept);
  CHECK(back.feat_mean == model.feat_mean);
  CHECK(back.lambda == model.lambda);
  std::filesystem::remove(path);
}
