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

// Command-line front end. Talks to the library through the C interface only.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "ucml/ucml.h"

namespace {

struct Flags {
  std::string config_file;
  std::optional<std::string> alpha, h, delta_alpha, ic, input, ic_profile;
  std::optional<double> delta, ic_value, ic_jitter, leading_h, slice_h, trailing_offset;
  std::optional<std::int64_t> n, max_time, width_limit, precision, ic_count;
  std::optional<std::uint64_t> seed;
  std::vector<std::int64_t> velocity_window;
  std::string out = ".";
  unsigned threads = 0;
  bool resume = false;
  bool print_config = false;
};

class CliError : public std::runtime_error {
 public:
  CliError(ucml_status s, const std::string& what)
      : std::runtime_error(what), status(s) {}
  ucml_status status;
};

void check(ucml_status s) {
  if (s != UCML_OK) throw CliError(s, ucml_last_error());
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CliError(UCML_ERR_IO, "cannot read '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file,
                  "Start from a config: JSON file, output document or table");
  cmd->add_option("--alpha", f.alpha, "Coupling: value, list a,b,c or lo:hi:step");
  cmd->add_option("--h", f.h, "Tent slope: value, list or lo:hi:step");
  cmd->add_option("--delta", f.delta, "Cutoff offset");
  cmd->add_option("--n", f.n, "Trajectories per parameter cell");
  cmd->add_option("--max-time", f.max_time, "Step cap per trajectory");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--threads", f.threads, "Worker threads (0: UCML_THREADS or all cores)");
  cmd->add_flag("--resume", f.resume, "Reuse finished phase-diagram cells");
  cmd->add_option("--ic", f.ic, "Initial condition: single, fixed, multi, explicit");
  cmd->add_option("--ic-value", f.ic_value, "Fixed kick value (default: x2)");
  cmd->add_option("--ic-jitter", f.ic_jitter, "Uniform offset half-width for the fixed kick");
  cmd->add_option("--ic-count", f.ic_count, "Sites for the multi-site kick");
  cmd->add_option("--ic-profile", f.ic_profile, "Explicit initial sites a,b,c");
  cmd->add_option("--width-limit", f.width_limit, "Stop runs wider than this (0: off)");
  cmd->add_option("--velocity-window", f.velocity_window, "Fit window begin,end")
      ->delimiter(',')
      ->expected(2);
  cmd->add_option("--delta-alpha", f.delta_alpha, "Distances below alpha_sn");
  cmd->add_option("--leading-h", f.leading_h, "h used for v_l(alpha)");
  cmd->add_option("--trailing-offset", f.trailing_offset,
                  "v_t(h) is measured at alpha_sn + this");
  cmd->add_option("--slice-h", f.slice_h, "Phase-diagram fixed-h slice");
  cmd->add_option("--input", f.input, "v_leading.csv to fit instead of simulating");
  cmd->add_option("--precision", f.precision, "Significant digits in space-time output");
  cmd->add_flag("--print-config", f.print_config, "Print the resolved config and exit");
}

ucml_config* build_config(const std::string& command, const Flags& f) {
  ucml_config* cfg = nullptr;
  if (!f.config_file.empty()) {
    check(ucml_config_from_text(slurp(f.config_file).c_str(), &cfg));
    char* stored = nullptr;
    check(ucml_config_get_command(cfg, &stored));
    const std::string name = stored;
    ucml_string_free(stored);
    if (name != command) {
      ucml_config_destroy(cfg);
      throw CliError(UCML_ERR_INVALID_ARGUMENT,
                     "config is for '" + name + "', not '" + command + "'");
    }
  } else {
    check(ucml_config_create(command.c_str(), &cfg));
  }
  const auto str = [&](const char* key, const std::optional<std::string>& v) {
    if (v) check(ucml_config_set_string(cfg, key, v->c_str()));
  };
  const auto dbl = [&](const char* key, const std::optional<double>& v) {
    if (v) check(ucml_config_set_double(cfg, key, *v));
  };
  const auto int64 = [&](const char* key, const std::optional<std::int64_t>& v) {
    if (v) check(ucml_config_set_int(cfg, key, *v));
  };
  try {
    str("alpha", f.alpha);
    str("h", f.h);
    str("delta_alpha", f.delta_alpha);
    str("ic", f.ic);
    str("ic_profile", f.ic_profile);
    str("input", f.input);
    dbl("delta", f.delta);
    dbl("ic_value", f.ic_value);
    dbl("ic_jitter", f.ic_jitter);
    dbl("leading_h", f.leading_h);
    dbl("slice_h", f.slice_h);
    dbl("trailing_alpha_offset", f.trailing_offset);
    int64("n", f.n);
    int64("max_time", f.max_time);
    int64("width_limit", f.width_limit);
    int64("precision", f.precision);
    int64("ic_count", f.ic_count);
    if (f.seed) check(ucml_config_set_seed(cfg, *f.seed));
    if (f.velocity_window.size() == 2) {
      check(ucml_config_set_int(cfg, "velocity_begin", f.velocity_window[0]));
      check(ucml_config_set_int(cfg, "velocity_end", f.velocity_window[1]));
    }
    check(ucml_config_set_string(cfg, "out", f.out.c_str()));
    check(ucml_config_set_int(cfg, "threads", f.threads));
    check(ucml_config_set_int(cfg, "resume", f.resume ? 1 : 0));
  } catch (...) {
    ucml_config_destroy(cfg);
    throw;
  }
  return cfg;
}

void log_to_stderr(const char* message, void*) {
  std::cerr << message << '\n';
}

int run(const std::string& command, const Flags& f) {
  ucml_config* cfg = build_config(command, f);
  char* text = nullptr;
  ucml_status s = UCML_OK;
  if (f.print_config) {
    s = ucml_config_to_json(cfg, &text);
  } else {
    s = ucml_run_command(cfg, log_to_stderr, nullptr, &text);
  }
  ucml_config_destroy(cfg);
  if (s != UCML_OK) throw CliError(s, ucml_last_error());
  std::cout << text << '\n';
  ucml_string_free(text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unidirectionally coupled map lattice: simulations and sweeps"};
  // "-h" would clash with the tent-slope flag --h.
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ucml_version()));

  const std::map<std::string, std::string> help = {
      {"simulate", "Space-time field of one trajectory"},
      {"ensemble", "Lifetime samples, survival table and fits for one cell"},
      {"velocities", "Edge velocities v_l(alpha), v_t(h) and the transition line"},
      {"thresholds", "Saddle-node coupling and alpha_P(h)"},
      {"phase-diagram", "Lifetime and outcome grid over (alpha, h)"},
      {"lifetime-scaling", "Puff lifetimes over h and the ln(tau) vs tau_s fit"},
      {"fit-intermittency", "Refit the constants of the leading-edge law"}};

  std::map<std::string, Flags> flags;
  size_t count = 0;
  const char* const* names = ucml_command_names(&count);
  for (size_t i = 0; i < count; ++i) {
    const std::string name = names[i];
    auto it = help.find(name);
    CLI::App* cmd = app.add_subcommand(name, it == help.end() ? "" : it->second);
    add_flags(cmd, flags[name]);
  }

  CLI11_PARSE(app, argc, argv);

  for (CLI::App* sub : app.get_subcommands()) {
    try {
      return run(sub->get_name(), flags[sub->get_name()]);
    } catch (const CliError& e) {
      std::cerr << "error (" << ucml_status_string(e.status) << "): " << e.what()
                << '\n';
      return static_cast<int>(e.status);
    }
  }
  return 0;
}
