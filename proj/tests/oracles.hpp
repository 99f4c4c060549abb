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

#pragma once

// Reference implementations used only by tests. They are written from the
// defining formulas in a different form than the library (tent map via |.|,
// expanded cubic, brute-force scans) so a shared mistake is unlikely.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ucml/dynamics.hpp"

namespace oracle {

inline double tent(double x, double h, double delta) {
  if (x < delta) return 0.0;
  return h * (1.0 - std::abs(x - 1.0 - delta));
}

inline double cubic(double x, double delta) {
  const double y = x - delta;
  if (y < 0.0 || y >= 2.0) return 0.0;
  return -1.5 * (y * y * y - 3.0 * y * y + 2.0 * y);
}

inline double cubic_slope(double x, double delta) {
  const double y = x - delta;
  return -1.5 * (3.0 * y * y - 6.0 * y + 2.0);
}

/// alpha_sn as the smallest alpha for which alpha g(x) = x has a root on the
/// rising branch: min of x / g(x), by dense scan plus golden-section polish.
inline double saddle_node_alpha(double delta) {
  const double lo = 1.0 + delta + 1e-9;
  const double hi = 2.0 + delta - 1e-9;
  const auto ratio = [&](double x) { return x / cubic(x, delta); };
  double best_x = lo;
  double best = ratio(lo);
  const int n = 200000;
  for (int i = 1; i < n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    if (ratio(x) < best) {
      best = ratio(x);
      best_x = x;
    }
  }
  double a = best_x - (hi - lo) / n;
  double b = best_x + (hi - lo) / n;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double c = b - gr * (b - a);
    const double d = a + gr * (b - a);
    if (ratio(c) < ratio(d)) b = d; else a = c;
  }
  return ratio(0.5 * (a + b));
}

/// Upper fixed point of the tent map by bisection on the falling branch.
inline double upper_fixed_point(double h, double delta) {
  double a = 1.0 + delta;
  double b = 2.0 + delta;
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    if (tent(m, h, delta) - m > 0.0) a = m; else b = m;
  }
  return 0.5 * (a + b);
}

/// Fixed-size lattice updated in full every step with the library's site
/// kernel. Used to check the engine's bookkeeping (window, growth, trim).
struct NaiveLattice {
  std::vector<double> x;
  ucml::ModelParams p;

  NaiveLattice(const ucml::ModelParams& params, const std::vector<double>& init,
               std::size_t size)
      : x(size, 0.0), p(params) {
    std::copy(init.begin(), init.end(), x.begin());
  }

  void step() {
    std::vector<double> next(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double left = i == 0 ? 0.0 : x[i - 1];
      next[i] = ucml::update_site(left, x[i], p.alpha, p.h, p.delta);
    }
    x.swap(next);
  }

  bool laminar() const {
    return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
  }
  std::int64_t leading() const {
    for (std::size_t i = x.size(); i-- > 0;) if (x[i] > 0.0) return static_cast<std::int64_t>(i);
    return -1;
  }
  std::int64_t trailing() const {
    for (std::size_t i = 0; i < x.size(); ++i) if (x[i] > 0.0) return static_cast<std::int64_t>(i);
    return -1;
  }
};

/// Lifetime of one uncoupled site started at x0: first t with x_t = 0.
inline std::int64_t single_site_lifetime(double x0, double h, double delta,
                                         std::int64_t cap) {
  double x = x0;
  for (std::int64_t t = 1; t <= cap; ++t) {
    x = std::max(tent(x, h, delta), 0.0);
    if (x == 0.0) return t;
  }
  return cap;
}

/// Geometric lifetimes with per-step hazard 1 - exp(-rate), offset so the
/// smallest possible value is 1.
inline std::vector<std::int64_t> geometric_lifetimes(double rate, std::size_t n,
                                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::geometric_distribution<std::int64_t> dist(-std::expm1(-rate));
  std::vector<std::int64_t> out(n);
  for (auto& t : out) t = dist(rng) + 1;
  return out;
}

/// Ordinary least-squares slope of y against x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracle
