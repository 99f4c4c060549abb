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

// Sweep orchestration: a self-describing configuration and one entry point
// per data product. Every table starts with a "# config: {...}" line and
// every JSON document carries a "config" member, so any output can be
// regenerated from itself.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ucml/bifurcation.hpp"
#include "ucml/simulation.hpp"

namespace ucml {

/// Parameter axis: an explicit list, or lo..hi (inclusive) with spacing step.
struct Axis {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;
  std::vector<double> points;

  static Axis single(double v) { return Axis{0.0, 0.0, 0.0, {v}}; }
  /// "v", "a,b,c" or "lo:hi:step".
  static Axis parse(const std::string& text);
  std::vector<double> values() const;
  std::string to_string() const;
};

struct SweepConfig {
  std::string command;
  Axis alpha;
  Axis h;
  Axis delta_alpha;  ///< fit-intermittency: distances below alpha_sn
  double delta = kDefaultDelta;

  std::size_t n = 1000;
  std::int64_t max_time = 1'000'000;
  std::uint64_t seed = 1;
  IcKind ic = IcKind::single_site;
  double ic_value = 0.0;  ///< fixed kick value; <= 0 means the fixed point x2
  double ic_jitter = 0.0;  ///< fixed kick: uniform offset half-width
  int ic_count = 1;
  std::vector<double> ic_profile;

  ClassificationRules rules;
  std::int64_t width_limit = 0;

  std::int64_t velocity_begin = 200;
  std::int64_t velocity_end = 2000;
  double leading_h = 2.05;               ///< h used for v_l(alpha)
  double trailing_alpha_offset = 0.05;   ///< v_t(h) measured at alpha_sn + this
  double slice_h = 2.1;                  ///< phase-diagram fixed-h slice
  double origin_multiple = 10.0;         ///< lifetime fits ignore t <= this * tau_s
  double scan_halfwidth = 0.01;
  double scan_step = 1e-5;
  int scan_horizon = 400;
  int precision = 0;
  std::string input;  ///< fit-intermittency: optional v_leading.csv to fit
  IntermittencyFit start;

  // Execution settings; never part of the serialized config.
  std::string out = ".";
  unsigned threads = 0;
  bool resume = false;
};

const std::vector<std::string>& command_names();

/// Defaults for one subcommand. Throws Error(invalid_argument) for an
/// unknown command.
SweepConfig default_config(const std::string& command);

void validate(const SweepConfig& config);

std::string config_to_json(const SweepConfig& config, int indent = -1);

/// Accepts a bare config object, any JSON output document (its "config"
/// member) or a table whose first line is "# config: {...}". Keys absent
/// from the text keep the command's defaults.
SweepConfig config_from_text(const std::string& text);

using LogFn = std::function<void(const std::string&)>;

/// Runs config.command, writes its files under config.out and returns a
/// short JSON summary.
std::string run_command(const SweepConfig& config, const LogFn& log = {});

std::string cmd_simulate(const SweepConfig& config, const LogFn& log = {});
std::string cmd_ensemble(const SweepConfig& config, const LogFn& log = {});
std::string cmd_velocities(const SweepConfig& config, const LogFn& log = {});
std::string cmd_thresholds(const SweepConfig& config, const LogFn& log = {});
std::string cmd_phase_diagram(const SweepConfig& config, const LogFn& log = {});
std::string cmd_lifetime_scaling(const SweepConfig& config,
                                 const LogFn& log = {});
std::string cmd_fit_intermittency(const SweepConfig& config,
                                  const LogFn& log = {});

}  // namespace ucml
