/*
  Copyright 2026 The ucml Authors

  Licensed under the Apache License, Version 2.0 (the "License");
  you may not use this file except in compliance with the License.
  You may obtain a copy of the License at

  http://www.apache.org/licenses/LICENSE-2.0

  Unless required by applicable law or agreed to in writing, software
  distributed under the License is distributed on an "AS IS" BASIS,
  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
  See the License for the specific language governing permissions and
  limitations under the License.
*/

#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ucml/error.hpp"
#include "ucml/statistics.hpp"

using namespace ucml;

namespace {

std::vector<LifetimeSample> uncensored(const std::vector<std::int64_t>& t) {
  std::vector<LifetimeSample> out;
  for (const auto x : t) out.push_back({x, false});
  return out;
}

}  // namespace

TEST_CASE("Kaplan-Meier without censoring is the empirical survival") {
  const auto t = oracle::geometric_lifetimes(0.1, 5000, 1);
  const auto table = survival_table(uncensored(t));
  double prev = 1.0;
  for (const SurvivalPoint& row : table) {
    CHECK(row.survival <= prev);
    CHECK(row.survival >= 0.0);
    const auto beyond = std::count_if(t.begin(), t.end(), [&](auto x) { return x > row.time; });
    CHECK(row.survival == doctest::Approx(static_cast<double>(beyond) / t.size()).epsilon(1e-12));
    prev = row.survival;
  }
  CHECK(table.back().survival == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("Kaplan-Meier with censoring stays monotone and above zero") {
  std::mt19937_64 rng(4);
  std::vector<LifetimeSample> s;
  for (const auto x : oracle::geometric_lifetimes(0.05, 3000, 2)) {
    const std::int64_t cut = 10 + static_cast<std::int64_t>(rng() % 100);
    s.push_back(x > cut ? LifetimeSample{cut, true} : LifetimeSample{x, false});
  }
  double prev = 1.0;
  for (const SurvivalPoint& row : survival_table(s)) {
    CHECK(row.survival <= prev);
    CHECK(row.survival > 0.0);
    prev = row.survival;
  }
}

TEST_CASE("exponential fit recovers the generating rate") {
  for (const std::uint64_t seed : {1u, 2u, 3u}) {
    const auto t = oracle::geometric_lifetimes(0.01, 10000, seed);
    const ExponentialFit fit = fit_exponential_lifetimes(uncensored(t), std::int64_t{0});
    CHECK(fit.rate == doctest::Approx(0.01).epsilon(0.03));
    CHECK(fit.mean == doctest::Approx(1.0 / fit.rate));
    CHECK(fit.rate_lo < fit.rate);
    CHECK(fit.rate_hi > fit.rate);
    CHECK(fit.events == 10000);
    CHECK(fit.ks_p_value > 0.001);
  }
}

TEST_CASE("default origin conditions on the shortest lifetime") {
  auto t = oracle::geometric_lifetimes(0.2, 20000, 5);
  for (auto& x : t) x += 30;
  const ExponentialFit fit = fit_exponential_lifetimes(uncensored(t));
  CHECK(fit.origin == 30);
  CHECK(fit.rate == doctest::Approx(0.2).epsilon(0.03));
  CHECK(fit.sample_mean > 30.0);
}

TEST_CASE("right-censored samples contribute survival time") {
  const auto t = oracle::geometric_lifetimes(0.01, 10000, 9);
  std::vector<LifetimeSample> s;
  for (const auto x : t) s.push_back(x > 150 ? LifetimeSample{150, true} : LifetimeSample{x, false});
  const ExponentialFit fit = fit_exponential_lifetimes(s, std::int64_t{0});
  CHECK(fit.censored > 1000);
  CHECK(fit.rate == doctest::Approx(0.01).epsilon(0.05));
}

TEST_CASE("random censoring leaves the generating rate inside the interval") {
  int covered = 0;
  for (std::uint64_t seed = 20; seed < 40; ++seed) {
    const auto t = oracle::geometric_lifetimes(0.02, 4000, seed);
    std::mt19937_64 rng(seed * 7);
    std::uniform_int_distribution<std::int64_t> cut(1, 200);
    std::vector<LifetimeSample> s;
    for (const auto x : t) {
      const std::int64_t c = cut(rng);
      s.push_back(x > c ? LifetimeSample{c, true} : LifetimeSample{x, false});
    }
    const ExponentialFit fit = fit_exponential_lifetimes(s, std::int64_t{0});
    if (fit.rate_lo <= 0.02 && 0.02 <= fit.rate_hi) ++covered;
    CHECK(fit.rate == doctest::Approx(0.02).epsilon(0.1));
  }
  // 95% intervals: 20 trials should rarely miss more than three times.
  CHECK(covered >= 17);
}

TEST_CASE("degenerate lifetime inputs") {
  const ExponentialFit one = fit_exponential_lifetimes(uncensored({12}), std::int64_t{0});
  CHECK(std::isfinite(one.rate));
  CHECK(one.mean_hi > 10.0 * one.mean_lo);
  const ExponentialFit first = fit_exponential_lifetimes(uncensored({1}));
  CHECK(std::isinf(first.rate));
  CHECK(first.mean_hi > 0.0);

  std::vector<LifetimeSample> censored_only = {{10, true}, {20, true}};
  try {
    fit_exponential_lifetimes(censored_only);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_data);
  }
  CHECK_THROWS_AS(fit_exponential_lifetimes({}), Error);
}

TEST_CASE("Kolmogorov tail probability") {
  // Classical large-n critical values.
  CHECK(kolmogorov_p_value(1.3581 / std::sqrt(1e6), 1000000) == doctest::Approx(0.05).epsilon(0.01));
  CHECK(kolmogorov_p_value(1.6276 / std::sqrt(1e6), 1000000) == doctest::Approx(0.01).epsilon(0.02));
  CHECK(kolmogorov_p_value(0.0, 10) == 1.0);
  CHECK(kolmogorov_p_value(0.5, 100) < 1e-10);
}

TEST_CASE("KS rejects lifetimes that are not geometric") {
  std::mt19937_64 rng(3);
  std::vector<std::int64_t> t;
  for (int i = 0; i < 5000; ++i) t.push_back(1 + static_cast<std::int64_t>(rng() % 60));
  const ExponentialFit fit = fit_exponential_lifetimes(uncensored(t), std::int64_t{0});
  CHECK(fit.ks_p_value < 1e-6);
}

TEST_CASE("super-exponential fit") {
  std::vector<LifetimePoint> pts;
  for (const double h : {2.05, 2.1, 2.15, 2.2, 2.3}) {
    pts.push_back({h, 3.0 * std::exp(0.5 / std::log(h / 2.0))});
  }
  const ScalingFit fit = fit_superexponential(pts);
  CHECK(fit.B == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(fit.C == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  for (const double r : fit.residuals) CHECK(std::abs(r) < 1e-9);

  pts[2].tau *= 1.5;
  const ScalingFit noisy = fit_superexponential(pts);
  CHECK(noisy.r_squared < 1.0);
  CHECK(std::abs(noisy.residuals[2]) > 0.1);

  CHECK_THROWS_AS(fit_superexponential(std::vector<LifetimePoint>(pts.begin(), pts.begin() + 2)), Error);
  CHECK_THROWS_AS(fit_superexponential(std::vector<LifetimePoint>{{2.0, 1}, {2.1, 2}, {2.2, 3}}), Error);
  CHECK_THROWS_AS(fit_superexponential(std::vector<LifetimePoint>{{2.1, 1}, {2.1, 2}, {2.1, 3}}), Error);
}

namespace {

double law(double da, const IntermittencyFit& f) {
  return 1.0 / (1.0 + std::sqrt(da) / (f.a * (f.nu_c + f.A * std::exp(-da / f.xi))));
}

std::vector<VelocityPoint> synthetic_velocities(const IntermittencyFit& f) {
  std::vector<VelocityPoint> pts;
  for (double da = 0.01; da <= 0.3001; da += 0.01) pts.push_back({da, law(da, f)});
  return pts;
}

}  // namespace

TEST_CASE("intermittency refit reproduces synthetic data") {
  const IntermittencyFit truth;
  const auto pts = synthetic_velocities(truth);

  const IntermittencyRefit exact = refit_intermittency_constants(pts, truth);
  CHECK(exact.converged);
  CHECK(exact.fit.a == doctest::Approx(truth.a).epsilon(1e-9));
  CHECK(exact.fit.nu_c == doctest::Approx(truth.nu_c).epsilon(1e-9));
  CHECK(exact.fit.A == doctest::Approx(truth.A).epsilon(1e-9));
  CHECK(exact.fit.xi == doctest::Approx(truth.xi).epsilon(1e-9));

  // From a perturbed start only a*nu_c, a*A and xi are pinned down.
  const IntermittencyRefit moved =
      refit_intermittency_constants(pts, {1.8, 0.03, 0.045, 0.03});
  CHECK(moved.max_abs_residual < 1e-6);
  CHECK(moved.fit.a * moved.fit.nu_c == doctest::Approx(truth.a * truth.nu_c).epsilon(0.05));
  CHECK(moved.fit.a * moved.fit.A == doctest::Approx(truth.a * truth.A).epsilon(0.05));
  CHECK(moved.fit.xi == doctest::Approx(truth.xi).epsilon(0.05));
  for (std::size_t i = 1; i < moved.cost_trace.size(); ++i) {
    CHECK(moved.cost_trace[i] <= moved.cost_trace[i - 1]);
  }
}

TEST_CASE("intermittency refit on noisy data") {
  const IntermittencyFit truth;
  auto pts = synthetic_velocities(truth);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (auto& p : pts) p.v += noise(rng);
  const IntermittencyRefit r = refit_intermittency_constants(pts);
  CHECK(r.residuals.size() == pts.size());
  CHECK(r.rms < 0.02);
  CHECK(r.max_abs_residual < 0.05);
}

TEST_CASE("intermittency refit input checks") {
  CHECK_THROWS_AS(refit_intermittency_constants(std::vector<VelocityPoint>{{0.1, 0.2}}), Error);
  CHECK_THROWS_AS(refit_intermittency_constants(
                      std::vector<VelocityPoint>{{0.1, 0.2}, {0.2, 0.1}, {0.0, 0.5}, {0.3, 0.1}}),
                  Error);
  CHECK_THROWS_AS(refit_intermittency_constants(synthetic_velocities({}), {-1.0, 0.1, 0.1, 0.1}),
                  Error);
}

TEST_CASE("running statistics merge like a single pass") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d(0.3, 0.05);
  RunningStats all, left, right;
  std::vector<double> xs;
  for (int i = 0; i < 1000; ++i) {
    const double x = d(rng);
    xs.push_back(x);
    all.add(x);
    (i < 300 ? left : right).add(x);
  }
  left.merge(right);
  CHECK(left.count() == all.count());
  CHECK(left.mean() == doctest::Approx(all.mean()).epsilon(1e-12));
  CHECK(left.stddev() == doctest::Approx(all.stddev()).epsilon(1e-10));
  double m = 0;
  for (const double x : xs) m += x;
  m /= xs.size();
  double ss = 0;
  for (const double x : xs) ss += (x - m) * (x - m);
  CHECK(all.stddev() == doctest::Approx(std::sqrt(ss / (xs.size() - 1))).epsilon(1e-10));
}

TEST_CASE("velocity aggregation checks the trailing bound") {
  const std::vector<VelocitySeries> lead = {{2.7, {0.2, 0.3}}, {2.8, {}}};
  const std::vector<VelocitySeries> trail = {{2.1, {0.1, 0.12}}, {2.5, {0.1, 0.1}}};
  const VelocityTables t = aggregate_velocity_curves(lead, trail);
  REQUIRE(t.leading.size() == 2);
  CHECK(t.leading[0].mean == doctest::Approx(0.25));
  CHECK(t.leading[0].stddev == doctest::Approx(std::sqrt(0.005)));
  CHECK(t.leading[1].n == 0);
  CHECK(std::isnan(t.leading[1].mean));
  CHECK(t.trailing[0].bound == doctest::Approx(std::log(1.05)));
  CHECK(t.trailing[0].bound_ok);
  CHECK(t.trailing[0].relative_gap == doctest::Approx(0.11 / std::log(1.05) - 1.0));
  CHECK_FALSE(t.trailing[1].bound_ok);
}
