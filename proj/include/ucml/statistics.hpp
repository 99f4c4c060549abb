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

// Lifetime statistics (censored geometric/exponential fits, survival tables,
// Kolmogorov-Smirnov), super-exponential lifetime scaling, velocity-curve
// aggregation and the least-squares refit of the leading-edge law.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ucml/bifurcation.hpp"
#include "ucml/simulation.hpp"

namespace ucml {

struct LifetimeSample {
  std::int64_t time = 0;
  bool censored = false;  ///< still alive at `time`
};

std::vector<LifetimeSample> lifetime_samples(
    std::span<const EnsembleSample> samples);

/// Kaplan-Meier estimate; one row per distinct event time.
struct SurvivalPoint {
  std::int64_t time = 0;
  std::int64_t at_risk = 0;
  std::int64_t events = 0;
  double survival = 1.0;  ///< S(time), after the events at `time`
};

std::vector<SurvivalPoint> survival_table(
    std::span<const LifetimeSample> samples);

/// Decay rate of lifetimes beyond `origin`. Lifetimes are integer step
/// counts, so the fit is the censored geometric MLE: per-step hazard
/// p = d / (d + K) with d deaths and K surviving steps, rate = -ln(1 - p).
struct ExponentialFit {
  double rate = 0.0;
  double rate_lo = 0.0;
  double rate_hi = 0.0;
  double mean = 0.0;  ///< 1 / rate
  double mean_lo = 0.0;
  double mean_hi = 0.0;
  double confidence = 0.95;
  double sample_mean = 0.0;  ///< plain average of all times, for reference
  std::int64_t origin = 0;
  std::size_t used = 0;      ///< samples with time > origin
  std::size_t events = 0;
  std::size_t censored = 0;
  double ks_statistic = 0.0;  ///< uncensored lifetimes vs the fitted law
  double ks_p_value = 1.0;
};

/// Samples with time <= origin are dropped (the fit is conditional on
/// survival past origin). Default origin: smallest sample time minus one.
/// Throws Error(insufficient_data) when no used sample is uncensored.
ExponentialFit fit_exponential_lifetimes(
    std::span<const LifetimeSample> samples,
    std::optional<std::int64_t> origin = std::nullopt,
    double confidence = 0.95);

/// Asymptotic Kolmogorov tail probability with Stephens' finite-n
/// correction.
double kolmogorov_p_value(double d, std::size_t n);

struct LifetimePoint {
  double h = 0.0;
  double tau = 0.0;
};

/// ln tau = ln B + C tau_s with tau_s = 1 / ln(h / 2).
struct ScalingFit {
  double B = 0.0;
  double C = 0.0;
  double r_squared = 0.0;
  std::vector<double> tau_s;
  std::vector<double> residuals;  ///< ln tau - fitted, per input point
};

ScalingFit fit_superexponential(std::span<const LifetimePoint> points);

struct VelocityPoint {
  double delta_alpha = 0.0;  ///< alpha_sn - alpha, > 0
  double v = 0.0;
};

struct IntermittencyRefit {
  IntermittencyFit fit;
  bool converged = false;
  int iterations = 0;
  double rms = 0.0;
  double max_abs_residual = 0.0;
  std::vector<double> residuals;   ///< model - data, per input point
  std::vector<double> cost_trace;  ///< sum of squares after each accepted step
};

/// Damped Gauss-Newton (Levenberg-Marquardt) fit of the leading-edge law in
/// log-parameters, started from `start`. At least 4 points are required.
/// Only a*nu_c, a*A and xi are identifiable from v_l alone.
IntermittencyRefit refit_intermittency_constants(
    std::span<const VelocityPoint> points, const IntermittencyFit& start = {},
    int max_iterations = 500);

/// Mergeable mean / variance accumulator.
class RunningStats {
 public:
  void add(double x);
  void merge(const RunningStats& other);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double stddev() const;  ///< sample standard deviation; 0 for n < 2

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct VelocityRow {
  double key = 0.0;  ///< alpha for leading rows, h for trailing rows
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
  double bound = 0.0;        ///< trailing rows: ln(h / 2)
  bool bound_ok = true;      ///< trailing rows: mean >= bound
  double relative_gap = 0.0; ///< trailing rows: (mean - bound) / bound
};

struct VelocitySeries {
  double key = 0.0;
  std::vector<double> values;
};

struct VelocityTables {
  std::vector<VelocityRow> leading;
  std::vector<VelocityRow> trailing;
};

/// Series without values are kept with n = 0 and NaN statistics.
VelocityTables aggregate_velocity_curves(
    std::span<const VelocitySeries> leading,
    std::span<const VelocitySeries> trailing);

}  // namespace ucml
