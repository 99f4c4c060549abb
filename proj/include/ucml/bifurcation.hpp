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

// Thresholds of the lattice: the laminar-to-puff coupling alpha_P, the
// saddle-node coupling alpha_sn of alpha*g, the velocity laws built on them,
// and the puff-slug transition line where leading and trailing edge
// velocities coincide.

#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "ucml/dynamics.hpp"

namespace ucml {

struct SaddleNode {
  double alpha_sn = 0.0;
  double x_fixed = 0.0;  ///< tangency point, in (1 + delta, 2 + delta)
  double value_residual = 0.0;  ///< alpha_sn * g(x_f) - x_f
  double slope_residual = 0.0;  ///< alpha_sn * g'(x_f) - 1
};

/// Constants of the leading-edge velocity law.
struct IntermittencyFit {
  double a = 1.55;       ///< tunnel-time prefactor, T = a * dAlpha^-1/2
  double nu_c = 0.039;   ///< baseline injection rate
  double A = 0.034;      ///< injection amplitude
  double xi = 0.023;     ///< injection decay scale
};

/// Solves alpha*g(x) = x and alpha*g'(x) = 1 by eliminating alpha:
/// g(x) = x g'(x) on the rising branch, then alpha = 1 / g'(x).
SaddleNode find_saddle_node(double delta);
inline SaddleNode find_saddle_node(const ModelParams& params) {
  return find_saddle_node(params.delta);
}

/// alpha_P = delta / g(x2), x2 the upper unstable fixed point of f.
double alpha_puff_threshold(const ModelParams& params);

struct ThresholdScan {
  double alpha_below = 0.0;  ///< largest probed alpha without propagation
  double alpha_above = 0.0;  ///< smallest probed alpha with propagation
  int probes = 0;
};

/// Brute-force check of alpha_P: a site pinned at x2 kicks its laminar right
/// neighbour every step; an alpha counts as propagating when a site two or
/// more places downstream reaches delta within `horizon` steps. Scans
/// [alpha_lo, alpha_hi] with spacing `step`.
ThresholdScan scan_puff_threshold(const ModelParams& params, double alpha_lo,
                                  double alpha_hi, double step,
                                  int horizon = 400);

/// ln(h / 2); a lower bound on the measured trailing-edge velocity.
double trailing_velocity_theory(double h);

double tunnel_time(double delta_alpha, const IntermittencyFit& fit);
double injection_rate(double delta_alpha, const IntermittencyFit& fit);

/// Little's lemma: fraction of time spent propagating, 1 / (1 + 1/(nu T)).
double propagation_probability(double nu, double residence_time);

/// Leading-edge velocity below the saddle node, p(alpha_sn - alpha).
/// Throws Error(domain) for alpha > alpha_sn.
double leading_velocity_theory(double alpha, const SaddleNode& sn,
                               const IntermittencyFit& fit);

/// Same as leading_velocity_theory below alpha_sn, 1 (ballistic) above.
double leading_velocity_model(double alpha, const SaddleNode& sn,
                              const IntermittencyFit& fit);

/// A velocity curve over a closed parameter interval.
struct VelocityCurve {
  std::function<double(double)> eval;
  double lo = 0.0;
  double hi = 0.0;
};

/// Piecewise-linear interpolant through (x, v) samples sorted by x.
VelocityCurve sampled_curve(std::vector<double> x, std::vector<double> v);

VelocityCurve theoretical_leading_curve(const SaddleNode& sn,
                                        const IntermittencyFit& fit,
                                        double alpha_lo);
VelocityCurve theoretical_trailing_curve(double h_lo, double h_hi);

/// Inverts a curve that increases over its interval. nullopt when v lies
/// outside the curve's range.
std::optional<double> invert_curve(const VelocityCurve& curve, double v);

struct TransitionPoint {
  double h = 0.0;
  double velocity = 0.0;  ///< v_t(h) = v_l(alpha_PS)
  double alpha = std::numeric_limits<double>::quiet_NaN();
  bool truncated = false;  ///< v_t(h) outside the sampled v_l range
};

struct TransitionCurves {
  std::vector<std::pair<double, double>> alpha_P;  ///< (h, alpha_P)
  std::vector<TransitionPoint> alpha_PS;
};

/// For each h solves v_l(alpha) = v_t(h) for alpha by bisection.
TransitionCurves transition_line_puff_slug(const std::vector<double>& h_grid,
                                           double delta,
                                           const VelocityCurve& leading,
                                           const VelocityCurve& trailing);

/// The same construction parametrized by velocity: returns (alpha, h) with
/// v_l(alpha) = v = v_t(h), or nullopt when either curve misses v.
std::optional<std::pair<double, double>> transition_at_velocity(
    double v, const VelocityCurve& leading, const VelocityCurve& trailing);

}  // namespace ucml
