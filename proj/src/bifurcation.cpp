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

#include "ucml/bifurcation.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "ucml/error.hpp"

namespace ucml {

namespace {

// Bisection to full double precision on a validated bracket.
template <class F>
double bisect_root(F f, double lo, double hi) {
  const double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0.0) == (fhi < 0.0)) {
    std::ostringstream msg;
    msg << "no sign change on [" << lo << ", " << hi << "]";
    fail(ErrorCode::no_root, msg.str());
  }
  std::uintmax_t max_iter = 200;
  const auto tol = boost::math::tools::eps_tolerance<double>(
      std::numeric_limits<double>::digits);
  const auto [a, b] = boost::math::tools::bisect(f, lo, hi, tol, max_iter);
  return std::abs(f(a)) <= std::abs(f(b)) ? a : b;
}

}  // namespace

SaddleNode find_saddle_node(double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) {
    fail(ErrorCode::domain, "saddle node requires 0 <= delta < 1");
  }
  // On the rising branch of g between its root 1+delta and its maximum the
  // tangency condition g(x) - x g'(x) changes sign exactly once.
  const double lo = 1.0 + delta;
  const double hi = 1.0 + delta + 1.0 / std::sqrt(3.0);
  const auto tangency = [delta](double x) {
    return coupling(x, delta) - x * coupling_slope(x, delta);
  };
  SaddleNode sn;
  sn.x_fixed = bisect_root(tangency, lo, hi);
  sn.alpha_sn = 1.0 / coupling_slope(sn.x_fixed, delta);
  sn.value_residual = sn.alpha_sn * coupling(sn.x_fixed, delta) - sn.x_fixed;
  sn.slope_residual = sn.alpha_sn * coupling_slope(sn.x_fixed, delta) - 1.0;
  return sn;
}

double alpha_puff_threshold(const ModelParams& params) {
  if (!(params.h > 1.0)) {
    fail(ErrorCode::domain, "alpha_P requires h > 1");
  }
  const double d = params.delta;
  const double x2 = onsite_fixed_points(params).x2.x;
  if (!(x2 > 1.0 + d && x2 < 2.0 + d)) {
    std::ostringstream msg;
    msg << "x2 = " << x2 << " outside (1+delta, 2+delta): g(x2) <= 0, no "
        << "propagation threshold";
    fail(ErrorCode::domain, msg.str());
  }
  return d / coupling(x2, d);
}

ThresholdScan scan_puff_threshold(const ModelParams& params, double alpha_lo,
                                  double alpha_hi, double step, int horizon) {
  if (!(step > 0.0) || !(alpha_hi > alpha_lo) || horizon < 1) {
    fail(ErrorCode::invalid_argument, "threshold scan needs lo < hi, step > 0");
  }
  const double x2 = onsite_fixed_points(params).x2.x;
  const auto propagates = [&](double alpha) {
    ModelParams p = params;
    p.alpha = alpha;
    LatticeState s;
    s.sites.assign(6, 0.0);
    s.sites[0] = x2;
    for (int t = 0; t < horizon; ++t) {
      s = ucml::step(s, p);
      s.sites[0] = x2;
      for (std::size_t i = 2; i < s.sites.size(); ++i) {
        if (s.sites[i] >= p.delta) return true;
      }
    }
    return false;
  };

  ThresholdScan scan;
  const auto count = static_cast<long>(std::floor((alpha_hi - alpha_lo) / step));
  bool prev = false;
  for (long k = 0; k <= count; ++k) {
    const double alpha = alpha_lo + static_cast<double>(k) * step;
    const bool now = propagates(alpha);
    ++scan.probes;
    if (k == 0 && now) {
      fail(ErrorCode::no_root, "scan starts inside the propagating region");
    }
    if (now && !prev) {
      scan.alpha_below = alpha_lo + static_cast<double>(k - 1) * step;
      scan.alpha_above = alpha;
      return scan;
    }
    prev = now;
  }
  fail(ErrorCode::no_root, "no propagation found in the scanned alpha range");
}

double trailing_velocity_theory(double h) {
  if (!(h >= kCriticalSlope)) {
    fail(ErrorCode::domain, "trailing-edge velocity requires h >= 2");
  }
  return std::log(h / kCriticalSlope);
}

double tunnel_time(double delta_alpha, const IntermittencyFit& fit) {
  return fit.a / std::sqrt(delta_alpha);
}

double injection_rate(double delta_alpha, const IntermittencyFit& fit) {
  return fit.nu_c + fit.A * std::exp(-delta_alpha / fit.xi);
}

double propagation_probability(double nu, double residence_time) {
  return 1.0 / (1.0 + 1.0 / (nu * residence_time));
}

double leading_velocity_theory(double alpha, const SaddleNode& sn,
                               const IntermittencyFit& fit) {
  const double da = sn.alpha_sn - alpha;
  if (da < 0.0) {
    fail(ErrorCode::domain, "alpha above alpha_sn: ballistic regime");
  }
  // Written in terms of sqrt(dAlpha) so that dAlpha = 0 gives exactly 1.
  return 1.0 / (1.0 + std::sqrt(da) / (fit.a * injection_rate(da, fit)));
}

double leading_velocity_model(double alpha, const SaddleNode& sn,
                              const IntermittencyFit& fit) {
  if (alpha >= sn.alpha_sn) return 1.0;
  return leading_velocity_theory(alpha, sn, fit);
}

VelocityCurve sampled_curve(std::vector<double> x, std::vector<double> v) {
  if (x.size() != v.size() || x.size() < 2) {
    fail(ErrorCode::insufficient_data, "a sampled curve needs >= 2 points");
  }
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) {
      fail(ErrorCode::invalid_argument, "curve abscissae must increase");
    }
  }
  VelocityCurve c;
  c.lo = x.front();
  c.hi = x.back();
  c.eval = [x = std::move(x), v = std::move(v)](double q) {
    if (q <= x.front()) return v.front();
    if (q >= x.back()) return v.back();
    const auto it = std::upper_bound(x.begin(), x.end(), q);
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double w = (q - x[i - 1]) / (x[i] - x[i - 1]);
    return v[i - 1] + w * (v[i] - v[i - 1]);
  };
  return c;
}

VelocityCurve theoretical_leading_curve(const SaddleNode& sn,
                                        const IntermittencyFit& fit,
                                        double alpha_lo) {
  VelocityCurve c;
  c.lo = alpha_lo;
  c.hi = sn.alpha_sn;
  c.eval = [sn, fit](double alpha) {
    return leading_velocity_model(alpha, sn, fit);
  };
  return c;
}

VelocityCurve theoretical_trailing_curve(double h_lo, double h_hi) {
  VelocityCurve c;
  c.lo = h_lo;
  c.hi = h_hi;
  c.eval = [](double h) { return trailing_velocity_theory(h); };
  return c;
}

std::optional<double> invert_curve(const VelocityCurve& curve, double v) {
  const double vlo = curve.eval(curve.lo);
  const double vhi = curve.eval(curve.hi);
  if (!(v >= vlo && v <= vhi)) return std::nullopt;
  return bisect_root([&](double x) { return curve.eval(x) - v; }, curve.lo,
                     curve.hi);
}

TransitionCurves transition_line_puff_slug(const std::vector<double>& h_grid,
                                           double delta,
                                           const VelocityCurve& leading,
                                           const VelocityCurve& trailing) {
  TransitionCurves out;
  for (const double h : h_grid) {
    ModelParams p{0.0, h, delta};
    if (h > 1.0 + delta) {
      out.alpha_P.emplace_back(h, alpha_puff_threshold(p));
    }
    TransitionPoint pt;
    pt.h = h;
    if (h < trailing.lo || h > trailing.hi) {
      pt.velocity = std::numeric_limits<double>::quiet_NaN();
      pt.truncated = true;
    } else {
      pt.velocity = trailing.eval(h);
      const auto alpha = invert_curve(leading, pt.velocity);
      if (alpha) {
        pt.alpha = *alpha;
      } else {
        pt.truncated = true;
      }
    }
    out.alpha_PS.push_back(pt);
  }
  return out;
}

std::optional<std::pair<double, double>> transition_at_velocity(
    double v, const VelocityCurve& leading, const VelocityCurve& trailing) {
  const auto alpha = invert_curve(leading, v);
  const auto h = invert_curve(trailing, v);
  if (!alpha || !h) return std::nullopt;
  return std::make_pair(*alpha, *h);
}

}  // namespace ucml
