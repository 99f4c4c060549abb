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

#include "ucml/statistics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <map>

#include "ucml/error.hpp"

namespace ucml {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-step hazard p -> continuous rate.
double hazard_to_rate(double p) {
  if (p >= 1.0) return kInf;
  return -std::log1p(-p);
}

}  // namespace

std::vector<LifetimeSample> lifetime_samples(
    std::span<const EnsembleSample> samples) {
  std::vector<LifetimeSample> out;
  out.reserve(samples.size());
  for (const EnsembleSample& s : samples) {
    out.push_back({s.lifetime, s.censored()});
  }
  return out;
}

std::vector<SurvivalPoint> survival_table(
    std::span<const LifetimeSample> samples) {
  // time -> (events, censored)
  std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> counts;
  for (const LifetimeSample& s : samples) {
    auto& c = counts[s.time];
    (s.censored ? c.second : c.first) += 1;
  }
  std::vector<SurvivalPoint> table;
  auto at_risk = static_cast<std::int64_t>(samples.size());
  double survival = 1.0;
  for (const auto& [time, c] : counts) {
    if (c.first > 0) {
      survival *= 1.0 - static_cast<double>(c.first) / static_cast<double>(at_risk);
      table.push_back({time, at_risk, c.first, survival});
    }
    at_risk -= c.first + c.second;
  }
  return table;
}

double kolmogorov_p_value(double d, std::size_t n) {
  if (n == 0 || !(d > 0.0)) return 1.0;
  const double rn = std::sqrt(static_cast<double>(n));
  const double lambda = (rn + 0.12 + 0.11 / rn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

ExponentialFit fit_exponential_lifetimes(
    std::span<const LifetimeSample> samples,
    std::optional<std::int64_t> origin, double confidence) {
  if (samples.empty()) {
    fail(ErrorCode::insufficient_data, "no lifetime samples");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    fail(ErrorCode::invalid_argument, "confidence must lie in (0, 1)");
  }
  ExponentialFit fit;
  fit.confidence = confidence;
  if (!origin) {
    std::int64_t t_min = samples.front().time;
    for (const LifetimeSample& s : samples) t_min = std::min(t_min, s.time);
    origin = t_min - 1;
  }
  fit.origin = *origin;

  double total = 0.0;
  double exposure = 0.0;  // surviving steps past origin
  std::vector<std::int64_t> deaths;
  for (const LifetimeSample& s : samples) {
    total += static_cast<double>(s.time);
    if (s.time <= fit.origin) continue;
    ++fit.used;
    const auto k = static_cast<double>(s.time - fit.origin);
    if (s.censored) {
      ++fit.censored;
      exposure += k;
    } else {
      deaths.push_back(s.time);
      exposure += k - 1.0;
    }
  }
  fit.sample_mean = total / static_cast<double>(samples.size());
  fit.events = deaths.size();
  if (fit.events == 0) {
    fail(ErrorCode::insufficient_data,
         "no uncensored lifetimes beyond the origin; rate is not estimable");
  }

  const auto d = static_cast<double>(fit.events);
  const double trials = d + exposure;
  fit.rate = exposure > 0.0 ? std::log1p(d / exposure) : kInf;

  // Clopper-Pearson interval for the per-step hazard.
  const double tail = 0.5 * (1.0 - confidence);
  const double p_lo = boost::math::ibeta_inv(d, trials - d + 1.0, tail);
  const double p_hi =
      exposure > 0.0 ? boost::math::ibeta_inv(d + 1.0, trials - d, 1.0 - tail) : 1.0;
  fit.rate_lo = hazard_to_rate(p_lo);
  fit.rate_hi = hazard_to_rate(p_hi);
  fit.mean = 1.0 / fit.rate;
  fit.mean_lo = 1.0 / fit.rate_hi;
  fit.mean_hi = 1.0 / fit.rate_lo;

  // KS distance between two step functions on the integers: check each
  // observed value and the integer just before it.
  std::sort(deaths.begin(), deaths.end());
  const double q = std::exp(-fit.rate);
  const auto cdf = [&](std::int64_t t) {
    if (t <= fit.origin) return 0.0;
    return -std::expm1(static_cast<double>(t - fit.origin) * std::log(q));
  };
  const double n = d;
  double ks = 0.0;
  double below = 0.0;
  for (std::size_t i = 0; i < deaths.size();) {
    std::size_t j = i;
    while (j < deaths.size() && deaths[j] == deaths[i]) ++j;
    const double at = static_cast<double>(j) / n;
    ks = std::max(ks, std::abs(below - cdf(deaths[i] - 1)));
    ks = std::max(ks, std::abs(at - cdf(deaths[i])));
    below = at;
    i = j;
  }
  fit.ks_statistic = ks;
  fit.ks_p_value = kolmogorov_p_value(ks, deaths.size());
  return fit;
}

// ---------------------------------------------------------------------------

ScalingFit fit_superexponential(std::span<const LifetimePoint> points) {
  if (points.size() < 3) {
    fail(ErrorCode::insufficient_data, "scaling fit needs at least 3 points");
  }
  ScalingFit fit;
  std::vector<double> y;
  for (const LifetimePoint& p : points) {
    if (!(p.h > kCriticalSlope) || !(p.tau > 0.0) || !std::isfinite(p.tau)) {
      fail(ErrorCode::domain, "scaling fit needs h > 2 and finite tau > 0");
    }
    fit.tau_s.push_back(1.0 / std::log(p.h / 2.0));
    y.push_back(std::log(p.tau));
  }
  const auto n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mx += fit.tau_s[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double dx = fit.tau_s[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) {
    fail(ErrorCode::insufficient_data, "scaling fit needs distinct h values");
  }
  fit.C = sxy / sxx;
  const double log_b = my - fit.C * mx;
  fit.B = std::exp(log_b);
  double ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - (log_b + fit.C * fit.tau_s[i]);
    fit.residuals.push_back(r);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

// ---------------------------------------------------------------------------

namespace {

struct LawEval {
  Eigen::VectorXd residual;  // model - data
  Eigen::MatrixXd jacobian;  // d model / d log-parameter
};

LawEval evaluate_law(std::span<const VelocityPoint> points,
                     const Eigen::Vector4d& theta) {
  const double a = std::exp(theta[0]);
  const double nu_c = std::exp(theta[1]);
  const double amp = std::exp(theta[2]);
  const double xi = std::exp(theta[3]);
  const auto m = static_cast<Eigen::Index>(points.size());
  LawEval out{Eigen::VectorXd(m), Eigen::MatrixXd(m, 4)};
  for (Eigen::Index i = 0; i < m; ++i) {
    const double da = points[i].delta_alpha;
    const double e = std::exp(-da / xi);
    const double s = a * (nu_c + amp * e);
    const double u = std::sqrt(da) / s;
    const double v = 1.0 / (1.0 + u);
    out.residual[i] = v - points[i].v;
    const double g = v * v * u / s;
    out.jacobian(i, 0) = g * s;
    out.jacobian(i, 1) = g * a * nu_c;
    out.jacobian(i, 2) = g * a * amp * e;
    out.jacobian(i, 3) = g * a * amp * e * da / xi;
  }
  return out;
}

}  // namespace

IntermittencyRefit refit_intermittency_constants(
    std::span<const VelocityPoint> points, const IntermittencyFit& start,
    int max_iterations) {
  if (points.size() < 4) {
    fail(ErrorCode::insufficient_data,
         "leading-edge fit needs at least 4 (delta_alpha, v) points");
  }
  for (const VelocityPoint& p : points) {
    if (!(p.delta_alpha > 0.0) || !std::isfinite(p.v)) {
      fail(ErrorCode::domain, "leading-edge fit needs delta_alpha > 0");
    }
  }
  if (!(start.a > 0.0 && start.nu_c > 0.0 && start.A > 0.0 && start.xi > 0.0)) {
    fail(ErrorCode::invalid_argument, "starting constants must be positive");
  }

  Eigen::Vector4d theta(std::log(start.a), std::log(start.nu_c),
                        std::log(start.A), std::log(start.xi));
  LawEval cur = evaluate_law(points, theta);
  double cost = cur.residual.squaredNorm();
  IntermittencyRefit out;
  out.cost_trace.push_back(cost);
  double lambda = 1e-3;

  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    const Eigen::Matrix4d jtj = cur.jacobian.transpose() * cur.jacobian;
    const Eigen::Vector4d grad = cur.jacobian.transpose() * cur.residual;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-14) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    while (lambda < 1e12) {
      Eigen::Matrix4d damped = jtj;
      damped.diagonal().array() += lambda * (1.0 + jtj.diagonal().array());
      const Eigen::Vector4d step = damped.ldlt().solve(-grad);
      const LawEval trial = evaluate_law(points, theta + step);
      const double trial_cost = trial.residual.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        const double drop = cost - trial_cost;
        theta += step;
        cur = trial;
        cost = trial_cost;
        out.cost_trace.push_back(cost);
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        if (drop <= 1e-15 * (1.0 + cost) &&
            step.lpNorm<Eigen::Infinity>() < 1e-10) {
          out.converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction left at any damping: a stationary point.
      out.converged = grad.lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + cost);
      break;
    }
    if (out.converged) break;
  }

  out.fit = {std::exp(theta[0]), std::exp(theta[1]), std::exp(theta[2]),
             std::exp(theta[3])};
  out.residuals.assign(cur.residual.data(),
                       cur.residual.data() + cur.residual.size());
  out.rms = std::sqrt(cost / static_cast<double>(points.size()));
  out.max_abs_residual = cur.residual.lpNorm<Eigen::Infinity>();
  return out;
}

// ---------------------------------------------------------------------------

void RunningStats::add(double x) {
  ++n_;
  const double dx = x - mean_;
  mean_ += dx / static_cast<double>(n_);
  m2_ += dx * (x - mean_);
}

void RunningStats::merge(const RunningStats& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const auto na = static_cast<double>(n_);
  const auto nb = static_cast<double>(other.n_);
  const double dx = other.mean_ - mean_;
  const double n = na + nb;
  mean_ += dx * nb / n;
  m2_ += other.m2_ + dx * dx * na * nb / n;
  n_ += other.n_;
}

double RunningStats::stddev() const {
  return n_ < 2 ? 0.0 : std::sqrt(m2_ / static_cast<double>(n_ - 1));
}

VelocityTables aggregate_velocity_curves(
    std::span<const VelocitySeries> leading,
    std::span<const VelocitySeries> trailing) {
  const auto summarize = [](const VelocitySeries& s) {
    RunningStats st;
    for (const double v : s.values) {
      if (std::isfinite(v)) st.add(v);
    }
    VelocityRow row;
    row.key = s.key;
    row.n = st.count();
    row.mean = row.n ? st.mean() : kNaN;
    row.stddev = row.n ? st.stddev() : kNaN;
    return row;
  };
  VelocityTables out;
  for (const VelocitySeries& s : leading) out.leading.push_back(summarize(s));
  for (const VelocitySeries& s : trailing) {
    VelocityRow row = summarize(s);
    row.bound = s.key > 0.0 ? std::log(s.key / 2.0) : kNaN;
    row.bound_ok = row.n == 0 || row.mean >= row.bound;
    row.relative_gap = row.bound > 0.0 ? (row.mean - row.bound) / row.bound : kNaN;
    out.trailing.push_back(row);
  }
  return out;
}

}  // namespace ucml
