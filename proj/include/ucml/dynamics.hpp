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

// On-site map f, coupling map g and the synchronous lattice update
//   x_{t+1}^i = max(alpha * g(x_t^{i-1}) + f(x_t^i), 0).

#include <cstdint>
#include <span>
#include <vector>

namespace ucml {

/// Slope at which the on-site tent map stops being transient. Not configurable.
inline constexpr double kCriticalSlope = 2.0;

/// Default cutoff offset.
inline constexpr double kDefaultDelta = 0.1;

struct ModelParams {
  double alpha = 0.0;  ///< coupling strength, >= 0
  double h = 2.1;      ///< tent-map slope, > 1
  double delta = kDefaultDelta;  ///< cutoff offset, in (0, 1)
};

/// Throws Error(invalid_argument) unless alpha >= 0, h > 1, 0 < delta < 1
/// and all three are finite.
void validate(const ModelParams& params);

// The kernels below are shared by every code path that evaluates the maps so
// that the reference update and the simulation engine agree bit for bit.

inline double onsite(double x, double h, double delta) noexcept {
  // Select-style so the engine loop vectorizes; same arithmetic per branch.
  const double rise = h * (x - delta);
  const double fall = -h * (x - 2.0 - delta);
  const double y = x < 1.0 + delta ? rise : fall;
  return x < delta ? 0.0 : y;
}

inline double coupling(double x, double delta) noexcept {
  const double y = -1.5 * (x - delta) * (x - 1.0 - delta) * (x - 2.0 - delta);
  const bool off = (x < delta) | (x >= 2.0 + delta);
  return off ? 0.0 : y;
}

/// Derivative of the cubic branch of g. Zero outside [delta, 2 + delta).
inline double coupling_slope(double x, double delta) noexcept {
  if (x < delta || x >= 2.0 + delta) return 0.0;
  const double a = x - delta;
  const double b = x - 1.0 - delta;
  const double c = x - 2.0 - delta;
  return -1.5 * (b * c + a * c + a * b);
}

inline double update_site(double left, double self, double alpha, double h,
                          double delta) noexcept {
  const double v = alpha * coupling(left, delta) + onsite(self, h, delta);
  return v > 0.0 ? v : 0.0;
}

double onsite_map(double x, const ModelParams& params);
double coupling_map(double x, const ModelParams& params);

/// Finite stretch of the lattice. Site 0 sees a laminar (zero) left
/// neighbour; whatever the last site would push further right is dropped.
struct LatticeState {
  std::vector<double> sites;
  std::int64_t time = 0;
};

/// One synchronous update. Reads every old value before writing.
LatticeState step(const LatticeState& state, const ModelParams& params);

struct FixedPoint {
  double x = 0.0;
  bool stable = false;
};

struct FixedPoints {
  FixedPoint x0;
  FixedPoint x1;
  FixedPoint x2;
};

/// Closed-form fixed points of f: 0, h*delta/(h-1), h*(2+delta)/(1+h).
/// Requires h > 1 and delta >= 0.
FixedPoints onsite_fixed_points(const ModelParams& params);

/// tau_s = 1 / ln(h / 2). Requires h > 2.
double single_site_lifetime_theory(const ModelParams& params);

}  // namespace ucml
