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

// Trajectory engine for an unbounded lattice: open boundary on the left,
// dynamic extension on the right, edge tracking, outcome classification and
// deterministic parallel ensembles.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ucml/dynamics.hpp"
#include "ucml/rng.hpp"

namespace ucml {

enum class IcKind {
  single_site,       ///< one site, uniform in the spreading window (1+d, 2+d)
  fixed_kick,        ///< one site at a given value
  multi_site,        ///< `count` adjacent sites, each uniform in the window
  explicit_profile,  ///< caller-supplied values
};

struct InitialCondition {
  IcKind kind = IcKind::single_site;
  double value = 0.0;
  int count = 1;
  std::vector<double> profile;
  std::uint64_t seed = 0;
  /// Fixed kick only: half-width of a uniform offset added to `value`.
  double jitter = 0.0;
};

/// Site values at t = 0, starting at global site 0.
std::vector<double> initial_profile(const InitialCondition& ic,
                                    const ModelParams& params);

/// Draw from the open spreading window (1 + delta, 2 + delta).
double spreading_draw(Rng& rng, double delta);

std::string to_string(IcKind kind);
IcKind ic_kind_from_string(const std::string& name);

struct EngineOptions {
  std::int64_t guard_band = 64;       ///< free sites kept right of the front
  std::size_t initial_capacity = 256;
  std::int64_t width_limit = 0;       ///< stop once width exceeds this; 0 = off
  bool record_edges = true;           ///< keep per-step edge vectors
  std::int64_t fit_begin = -1;        ///< streaming edge fit over [begin, end]
  std::int64_t fit_end = -1;
};

/// The lattice as seen by the engine. Only the active stretch is updated;
/// the zero prefix left of the trailing edge is dropped as it grows.
class Lattice {
 public:
  Lattice(const ModelParams& params, std::span<const double> initial,
          const EngineOptions& options = {});

  void advance();

  std::int64_t time() const { return time_; }
  bool laminar() const { return laminar_; }
  /// Rightmost / leftmost site with x > 0 (global index). Undefined when
  /// laminar.
  std::int64_t leading() const { return origin_ + hi_; }
  std::int64_t trailing() const { return origin_ + lo_; }
  std::int64_t active_sites() const;
  double at(std::int64_t site) const;
  std::size_t capacity() const { return cells_.size(); }

 private:
  void grow();
  void trim();

  ModelParams params_;
  std::int64_t guard_band_;
  std::vector<double> cells_;
  std::vector<double> kicks_;
  std::int64_t origin_ = 0;
  std::int64_t lo_ = 0;
  std::int64_t hi_ = 0;
  std::int64_t time_ = 0;
  bool laminar_ = true;
};

/// Streaming least-squares slopes of both edges against time.
class EdgeFit {
 public:
  void add(double t, double leading, double trailing);
  std::int64_t count() const { return n_; }
  double leading_slope() const;
  double trailing_slope() const;

 private:
  std::int64_t n_ = 0;
  double mean_t_ = 0.0;
  double mean_l_ = 0.0;
  double mean_r_ = 0.0;
  double m_tt_ = 0.0;
  double c_tl_ = 0.0;
  double c_tr_ = 0.0;
};

enum class Termination { decayed, max_time, width_limit };
std::string to_string(Termination cause);

struct TrajectoryRecord {
  // Entry t describes the lattice after t updates, t = 0 .. last active step.
  std::vector<std::int64_t> leading;
  std::vector<std::int64_t> trailing;
  std::vector<std::int64_t> active;
  /// First t with every site exactly 0, or the step at which the run stopped.
  std::int64_t lifetime = 0;
  Termination cause = Termination::decayed;
  std::uint64_t seed = 0;
  EdgeFit window_fit;

  bool censored() const { return cause != Termination::decayed; }
};

using StepObserver = std::function<void(const Lattice&)>;

/// Deterministic in (params, ic, max_time). The observer, when set, sees the
/// lattice at t = 0 and after every update.
TrajectoryRecord run_trajectory(const ModelParams& params,
                                const InitialCondition& ic,
                                std::int64_t max_time,
                                const EngineOptions& options = {},
                                const StepObserver& observer = {});

struct EdgeVelocities {
  double leading = 0.0;
  double trailing = 0.0;
};

/// Least-squares edge slopes over times [begin, end). The record must be
/// active over the whole window and the window at least 10 steps long.
EdgeVelocities measure_edge_velocities(const TrajectoryRecord& record,
                                       std::int64_t begin, std::int64_t end);

enum class Label { decay, puff, slug };
std::string to_string(Label label);

struct ClassificationRules {
  double decay_multiple = 10.0;        ///< decay if tau <= this * tau_s
  double long_lived_multiple = 1000.0; ///< long-lived puff if tau > this * tau_s
  double slug_margin = 0.01;           ///< slug if v_l - v_t exceeds this
  std::int64_t slug_window = 500;      ///< minimum regression window
};

struct Classification {
  Label label = Label::decay;
  double v_l = std::numeric_limits<double>::quiet_NaN();
  double v_t = std::numeric_limits<double>::quiet_NaN();
  double width_slope = std::numeric_limits<double>::quiet_NaN();
  bool long_lived = false;
};

/// Window [begin, end] over which a run that is still alive at `t_end` is
/// checked for width growth: the last max(slug_window, t_end / 2) steps.
std::pair<std::int64_t, std::int64_t> classification_window(
    std::int64_t t_end, const ClassificationRules& rules);

/// Uses the per-step edges when the record has them, else its window_fit.
Classification classify(const TrajectoryRecord& record,
                        const ModelParams& params,
                        const ClassificationRules& rules = {});

struct EnsembleOptions {
  std::size_t n = 1;
  std::uint64_t master_seed = 0;
  InitialCondition ic;  ///< seed is replaced per sample
  std::int64_t max_time = 1'000'000;
  std::int64_t width_limit = 0;
  /// When set, runs stop at `second` and edge velocities are fitted over
  /// [first, second]; only runs alive at `second` carry velocities.
  std::optional<std::pair<std::int64_t, std::int64_t>> velocity_window;
  ClassificationRules rules;
  unsigned threads = 0;
};

struct EnsembleSample {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::int64_t lifetime = 0;
  Termination cause = Termination::decayed;
  Label label = Label::decay;
  bool long_lived = false;
  double v_l = std::numeric_limits<double>::quiet_NaN();
  double v_t = std::numeric_limits<double>::quiet_NaN();

  bool censored() const { return cause != Termination::decayed; }
  bool has_velocities() const { return v_l == v_l && v_t == v_t; }
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Sample i uses seed derive_seed(master_seed, i). The returned vector is
/// ordered by index and identical for every thread count.
std::vector<EnsembleSample> run_ensemble(const ModelParams& params,
                                         const EnsembleOptions& options,
                                         const ProgressFn& progress = {});

struct SpaceTimeOptions {
  std::int64_t max_time = 4000;
  int precision = 0;  ///< significant digits; 0 = shortest round-trip
};

/// Writes the space-time field: a '#' header line with parameters and seed,
/// then one row per time step holding the comma-separated values of sites
/// 0 .. max leading edge reached.
void write_space_time(std::ostream& out, const ModelParams& params,
                      const InitialCondition& ic,
                      const SpaceTimeOptions& options);

/// Shortest (precision 0) or fixed-significant-digit decimal form.
std::string format_double(double v, int precision = 0);

}  // namespace ucml
