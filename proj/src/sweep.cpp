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

#include "ucml/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "ucml/error.hpp"
#include "ucml/parallel.hpp"
#include "ucml/statistics.hpp"

namespace ucml {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kConfigVersion = 1;

// ---------------------------------------------------------------- formatting

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

std::string num(std::int64_t v) { return std::to_string(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string num(bool v) { return v ? "1" : "0"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (const char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

class Table {
 public:
  Table(const SweepConfig& config, std::vector<std::string> columns)
      : width_(columns.size()) {
    text_ = "# config: " + config_to_json(config) + "\n";
    row(columns);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) {
      fail(ErrorCode::invalid_argument, "table row has the wrong width");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += csv_field(cells[i]);
    }
    text_ += '\n';
  }

  const std::string& text() const { return text_; }

 private:
  std::size_t width_;
  std::string text_;
};

// Non-finite doubles become null.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double from_jnum(const json& j) {
  return j.is_null() ? kNaN : j.get<double>();
}

// ---------------------------------------------------------------------- files

fs::path output_dir(const SweepConfig& config) {
  const fs::path dir(config.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    fail(ErrorCode::io, "cannot create output directory '" + config.out + "'");
  }
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  // Write-then-rename so a reader never sees a partial file.
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::io, "cannot write '" + tmp.string() + "'");
    f << content;
    f.flush();
    if (!f) fail(ErrorCode::io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::io, "cannot rename onto '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::io, "cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string document(const SweepConfig& config, json body) {
  json doc;
  doc["config"] = json::parse(config_to_json(config));
  for (auto& [k, v] : body.items()) doc[k] = std::move(v);
  return doc.dump(2) + "\n";
}

// --------------------------------------------------------------------- setup

ModelParams params_at(const SweepConfig& c, double alpha, double h) {
  ModelParams p{alpha, h, c.delta};
  validate(p);
  return p;
}

InitialCondition make_ic(const SweepConfig& c, const ModelParams& p) {
  InitialCondition ic;
  ic.kind = c.ic;
  ic.value = c.ic_value > 0.0 ? c.ic_value : onsite_fixed_points(p).x2.x;
  ic.count = c.ic_count;
  ic.jitter = c.ic_jitter;
  ic.profile = c.ic_profile;
  return ic;
}

double tau_s_or_nan(const ModelParams& p) {
  return p.h > kCriticalSlope ? single_site_lifetime_theory(p) : kNaN;
}

std::string cell_name(double alpha, double h) {
  return "(alpha=" + format_double(alpha) + ", h=" + format_double(h) + ")";
}

// Re-raises module errors with the offending parameter cell in the message.
template <class F>
auto with_cell(double alpha, double h, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    fail(e.code(), "cell " + cell_name(alpha, h) + ": " + e.what());
  }
}

double single_value(const Axis& axis, const char* name) {
  const auto v = axis.values();
  if (v.size() != 1) {
    fail(ErrorCode::invalid_argument,
         std::string("this command takes a single ") + name + " value");
  }
  return v.front();
}

EnsembleOptions ensemble_options(const SweepConfig& c, const ModelParams& p,
                                 std::uint64_t master, unsigned threads) {
  EnsembleOptions o;
  o.n = c.n;
  o.master_seed = master;
  o.ic = make_ic(c, p);
  o.max_time = c.max_time;
  o.width_limit = c.width_limit;
  o.rules = c.rules;
  o.threads = threads;
  return o;
}

json fit_json(const ExponentialFit& f) {
  return json{{"rate", jnum(f.rate)},
              {"rate_lo", jnum(f.rate_lo)},
              {"rate_hi", jnum(f.rate_hi)},
              {"tau", jnum(f.mean)},
              {"tau_lo", jnum(f.mean_lo)},
              {"tau_hi", jnum(f.mean_hi)},
              {"confidence", f.confidence},
              {"origin", f.origin},
              {"used", f.used},
              {"events", f.events},
              {"censored", f.censored},
              {"sample_mean", jnum(f.sample_mean)},
              {"ks_statistic", jnum(f.ks_statistic)},
              {"ks_p_value", jnum(f.ks_p_value)}};
}

json try_fit(const std::vector<LifetimeSample>& samples,
             std::optional<std::int64_t> origin) {
  try {
    return fit_json(fit_exponential_lifetimes(samples, origin));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::insufficient_data) throw;
    return json{{"error", e.what()}};
  }
}

struct LabelCounts {
  std::size_t decay = 0, puff = 0, slug = 0, long_lived = 0, censored = 0;
};

LabelCounts count_labels(const std::vector<EnsembleSample>& samples) {
  LabelCounts c;
  for (const EnsembleSample& s : samples) {
    c.decay += s.label == Label::decay;
    c.puff += s.label == Label::puff;
    c.slug += s.label == Label::slug;
    c.long_lived += s.long_lived;
    c.censored += s.censored();
  }
  return c;
}

json fractions_json(const LabelCounts& c, std::size_t n) {
  const auto f = [n](std::size_t k) {
    return static_cast<double>(k) / static_cast<double>(n);
  };
  return json{{"decay", f(c.decay)},
              {"puff", f(c.puff)},
              {"slug", f(c.slug)},
              {"long_lived", f(c.long_lived)}};
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used == t.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::invalid_argument, "not a number: '" + text + "'");
}

}  // namespace

// ---------------------------------------------------------------------- Axis

Axis Axis::parse(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) fail(ErrorCode::invalid_argument, "empty parameter axis");
  Axis axis;
  if (t.find(':') != std::string::npos) {
    const auto parts = split(t, ':');
    if (parts.size() != 3) {
      fail(ErrorCode::invalid_argument, "range must be lo:hi:step, got '" + t + "'");
    }
    axis.lo = parse_double(parts[0]);
    axis.hi = parse_double(parts[1]);
    axis.step = parse_double(parts[2]);
    if (!(axis.step > 0.0) || !(axis.hi >= axis.lo)) {
      fail(ErrorCode::invalid_argument, "range needs lo <= hi and step > 0");
    }
  } else {
    for (const std::string& p : split(t, ',')) axis.points.push_back(parse_double(p));
  }
  return axis;
}

std::vector<double> Axis::values() const {
  if (!points.empty()) return points;
  if (!(step > 0.0) || !(hi >= lo)) return {};
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> v;
  for (long k = 0; k <= count; ++k) {
    // Snap to 12 decimals so 2.0 + 3 * 0.05 is stored as 2.15.
    v.push_back(std::round((lo + static_cast<double>(k) * step) * 1e12) / 1e12);
  }
  return v;
}

std::string Axis::to_string() const {
  if (points.empty()) {
    return format_double(lo) + ":" + format_double(hi) + ":" + format_double(step);
  }
  std::string s;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i) s += ',';
    s += format_double(points[i]);
  }
  return s;
}

// -------------------------------------------------------------------- config

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "simulate",      "ensemble",         "velocities",       "thresholds",
      "phase-diagram", "lifetime-scaling", "fit-intermittency"};
  return names;
}

SweepConfig default_config(const std::string& command) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    fail(ErrorCode::invalid_argument, "unknown command '" + command + "'");
  }
  SweepConfig c;
  c.command = command;
  c.alpha = Axis::single(0.5);
  c.h = Axis::single(2.1);
  c.delta_alpha = Axis{0.02, 0.15, 0.01, {}};
  if (command == "simulate") {
    c.h = Axis::single(2.05);
    c.n = 1;
    c.max_time = 4000;
  } else if (command == "ensemble") {
    c.alpha = Axis::single(0.1);
  } else if (command == "velocities") {
    c.alpha = Axis{2.5, 2.84, 0.02, {}};
    c.h = Axis{2.02, 3.0, 0.04, {}};
  } else if (command == "thresholds") {
    c.h = Axis{2.0, 3.0, 0.05, {}};
  } else if (command == "phase-diagram") {
    c.alpha = Axis{0.0, 3.0, 0.1, {}};
    c.h = Axis{2.0, 3.0, 0.05, {}};
    c.n = 100;
    c.max_time = 100'000;
    c.width_limit = 2000;
  } else if (command == "lifetime-scaling") {
    c.alpha = Axis{0.0, 0.0, 0.0, {0.5, 0.8}};
    c.h = Axis{0.0, 0.0, 0.0, {2.1, 2.125, 2.15, 2.175, 2.2, 2.25, 2.3}};
    c.n = 2000;
    c.width_limit = 1000;
  } else if (command == "fit-intermittency") {
    c.h = Axis::single(2.05);
    c.n = 200;
  }
  return c;
}

void validate(const SweepConfig& c) {
  default_config(c.command);  // rejects unknown commands
  const auto check_axis = [](const Axis& a, const char* name) {
    const auto v = a.values();
    if (v.empty()) {
      fail(ErrorCode::invalid_argument, std::string(name) + " axis is empty");
    }
    for (const double x : v) {
      if (!std::isfinite(x)) {
        fail(ErrorCode::invalid_argument,
             std::string(name) + " axis has a non-finite value");
      }
    }
  };
  check_axis(c.alpha, "alpha");
  check_axis(c.h, "h");
  check_axis(c.delta_alpha, "delta_alpha");
  if (!(c.delta > 0.0 && c.delta < 1.0)) {
    fail(ErrorCode::invalid_argument, "delta must lie in (0, 1)");
  }
  if (c.n < 1) fail(ErrorCode::invalid_argument, "n must be >= 1");
  if (c.max_time < 1) fail(ErrorCode::invalid_argument, "max_time must be >= 1");
  if (c.width_limit < 0) fail(ErrorCode::invalid_argument, "width_limit must be >= 0");
  if (c.velocity_begin < 0 || c.velocity_end - c.velocity_begin < 10) {
    fail(ErrorCode::invalid_argument,
         "velocity window must start at >= 0 and span >= 10 steps");
  }
  if (!(c.rules.decay_multiple > 0.0) || !(c.rules.long_lived_multiple > 0.0) ||
      !(c.rules.slug_margin >= 0.0) || c.rules.slug_window < 10) {
    fail(ErrorCode::invalid_argument, "invalid classification rules");
  }
  if (!(c.origin_multiple >= 0.0)) {
    fail(ErrorCode::invalid_argument, "origin_multiple must be >= 0");
  }
  if (!(c.scan_step >= 0.0) || !(c.scan_halfwidth > 0.0) || c.scan_horizon < 1) {
    fail(ErrorCode::invalid_argument, "invalid threshold scan settings");
  }
  if (c.precision < 0 || c.precision > 17) {
    fail(ErrorCode::invalid_argument, "precision must lie in [0, 17]");
  }
  if (c.ic == IcKind::multi_site && c.ic_count < 1) {
    fail(ErrorCode::invalid_argument, "ic_count must be >= 1");
  }
  if (!(c.ic_jitter >= 0.0)) {
    fail(ErrorCode::invalid_argument, "ic_jitter must be >= 0");
  }
}

std::string config_to_json(const SweepConfig& c, int indent) {
  json j;
  j["version"] = kConfigVersion;
  j["command"] = c.command;
  j["alpha"] = c.alpha.to_string();
  j["h"] = c.h.to_string();
  j["delta_alpha"] = c.delta_alpha.to_string();
  j["delta"] = c.delta;
  j["n"] = c.n;
  j["max_time"] = c.max_time;
  j["seed"] = c.seed;
  j["ic"] = to_string(c.ic);
  j["ic_value"] = c.ic_value;
  j["ic_jitter"] = c.ic_jitter;
  j["ic_count"] = c.ic_count;
  j["ic_profile"] = c.ic_profile;
  j["rules"] = {{"decay_multiple", c.rules.decay_multiple},
                {"long_lived_multiple", c.rules.long_lived_multiple},
                {"slug_margin", c.rules.slug_margin},
                {"slug_window", c.rules.slug_window}};
  j["width_limit"] = c.width_limit;
  j["velocity_window"] = {c.velocity_begin, c.velocity_end};
  j["leading_h"] = c.leading_h;
  j["trailing_alpha_offset"] = c.trailing_alpha_offset;
  j["slice_h"] = c.slice_h;
  j["origin_multiple"] = c.origin_multiple;
  j["scan"] = {{"halfwidth", c.scan_halfwidth},
               {"step", c.scan_step},
               {"horizon", c.scan_horizon}};
  j["precision"] = c.precision;
  j["input"] = c.input;
  j["start"] = {{"a", c.start.a},
                {"nu_c", c.start.nu_c},
                {"A", c.start.A},
                {"xi", c.start.xi}};
  return j.dump(indent);
}

SweepConfig config_from_text(const std::string& text) {
  std::string body = trim(text);
  const std::string marker = "# config:";
  if (body.rfind(marker, 0) == 0) {
    body = body.substr(marker.size());
    body = body.substr(0, body.find('\n'));
  }
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("config is not valid JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("config") && j["config"].is_object()) {
    j = j["config"];
  }
  if (!j.is_object() || !j.contains("command") || !j["command"].is_string()) {
    fail(ErrorCode::invalid_argument, "config needs a \"command\" string");
  }
  SweepConfig c = default_config(j["command"].get<std::string>());
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "version") {
        if (v.get<int>() != kConfigVersion) {
          fail(ErrorCode::invalid_argument, "unsupported config version");
        }
      } else if (key == "command") {
      } else if (key == "alpha") {
        c.alpha = v.is_number() ? Axis::single(v.get<double>()) : Axis::parse(v.get<std::string>());
      } else if (key == "h") {
        c.h = v.is_number() ? Axis::single(v.get<double>()) : Axis::parse(v.get<std::string>());
      } else if (key == "delta_alpha") {
        c.delta_alpha = v.is_number() ? Axis::single(v.get<double>())
                                      : Axis::parse(v.get<std::string>());
      } else if (key == "delta") {
        c.delta = v.get<double>();
      } else if (key == "n") {
        c.n = v.get<std::size_t>();
      } else if (key == "max_time") {
        c.max_time = v.get<std::int64_t>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "ic") {
        c.ic = ic_kind_from_string(v.get<std::string>());
      } else if (key == "ic_value") {
        c.ic_value = v.get<double>();
      } else if (key == "ic_jitter") {
        c.ic_jitter = v.get<double>();
      } else if (key == "ic_count") {
        c.ic_count = v.get<int>();
      } else if (key == "ic_profile") {
        c.ic_profile = v.get<std::vector<double>>();
      } else if (key == "rules") {
        for (const auto& [rk, rv] : v.items()) {
          if (rk == "decay_multiple") c.rules.decay_multiple = rv.get<double>();
          else if (rk == "long_lived_multiple") c.rules.long_lived_multiple = rv.get<double>();
          else if (rk == "slug_margin") c.rules.slug_margin = rv.get<double>();
          else if (rk == "slug_window") c.rules.slug_window = rv.get<std::int64_t>();
          else fail(ErrorCode::invalid_argument, "unknown rules key '" + rk + "'");
        }
      } else if (key == "width_limit") {
        c.width_limit = v.get<std::int64_t>();
      } else if (key == "velocity_window") {
        const auto w = v.get<std::vector<std::int64_t>>();
        if (w.size() != 2) fail(ErrorCode::invalid_argument, "velocity_window needs 2 entries");
        c.velocity_begin = w[0];
        c.velocity_end = w[1];
      } else if (key == "leading_h") {
        c.leading_h = v.get<double>();
      } else if (key == "trailing_alpha_offset") {
        c.trailing_alpha_offset = v.get<double>();
      } else if (key == "slice_h") {
        c.slice_h = v.get<double>();
      } else if (key == "origin_multiple") {
        c.origin_multiple = v.get<double>();
      } else if (key == "scan") {
        for (const auto& [sk, sv] : v.items()) {
          if (sk == "halfwidth") c.scan_halfwidth = sv.get<double>();
          else if (sk == "step") c.scan_step = sv.get<double>();
          else if (sk == "horizon") c.scan_horizon = sv.get<int>();
          else fail(ErrorCode::invalid_argument, "unknown scan key '" + sk + "'");
        }
      } else if (key == "precision") {
        c.precision = v.get<int>();
      } else if (key == "input") {
        c.input = v.get<std::string>();
      } else if (key == "start") {
        for (const auto& [fk, fv] : v.items()) {
          if (fk == "a") c.start.a = fv.get<double>();
          else if (fk == "nu_c") c.start.nu_c = fv.get<double>();
          else if (fk == "A") c.start.A = fv.get<double>();
          else if (fk == "xi") c.start.xi = fv.get<double>();
          else fail(ErrorCode::invalid_argument, "unknown start key '" + fk + "'");
        }
      } else {
        fail(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("bad config value: ") + e.what());
  }
  validate(c);
  return c;
}

// ------------------------------------------------------------------ commands

std::string run_command(const SweepConfig& config, const LogFn& log) {
  const std::string& cmd = config.command;
  if (cmd == "simulate") return cmd_simulate(config, log);
  if (cmd == "ensemble") return cmd_ensemble(config, log);
  if (cmd == "velocities") return cmd_velocities(config, log);
  if (cmd == "thresholds") return cmd_thresholds(config, log);
  if (cmd == "phase-diagram") return cmd_phase_diagram(config, log);
  if (cmd == "lifetime-scaling") return cmd_lifetime_scaling(config, log);
  if (cmd == "fit-intermittency") return cmd_fit_intermittency(config, log);
  fail(ErrorCode::invalid_argument, "unknown command '" + cmd + "'");
}

std::string cmd_simulate(const SweepConfig& config, const LogFn& log) {
  validate(config);
  const double alpha = single_value(config.alpha, "alpha");
  const double h = single_value(config.h, "h");
  const ModelParams p = params_at(config, alpha, h);
  InitialCondition ic = make_ic(config, p);
  ic.seed = config.seed;
  const fs::path dir = output_dir(config);

  std::ostringstream field;
  write_space_time(field, p, ic, {config.max_time, config.precision});
  write_file(dir / "spacetime.csv", field.str());

  const TrajectoryRecord rec = run_trajectory(p, ic, config.max_time);
  const Classification cls = classify(rec, p, config.rules);
  json body{{"seed", config.seed},
            {"tau_s", jnum(tau_s_or_nan(p))},
            {"lifetime", rec.lifetime},
            {"cause", to_string(rec.cause)},
            {"label", to_string(cls.label)},
            {"long_lived", cls.long_lived},
            {"v_l", jnum(cls.v_l)},
            {"v_t", jnum(cls.v_t)},
            {"width_slope", jnum(cls.width_slope)},
            {"final_width", rec.leading.empty()
                                ? 0
                                : rec.leading.back() - rec.trailing.back() + 1}};
  write_file(dir / "spacetime.json", document(config, body));
  if (log) log("simulate: " + to_string(cls.label) + ", lifetime " + std::to_string(rec.lifetime));
  return body.dump();
}

std::string cmd_ensemble(const SweepConfig& config, const LogFn& log) {
  validate(config);
  const double alpha = single_value(config.alpha, "alpha");
  const double h = single_value(config.h, "h");
  const ModelParams p = params_at(config, alpha, h);
  const fs::path dir = output_dir(config);

  const auto samples = run_ensemble(
      p, ensemble_options(config, p, config.seed, config.threads),
      [&](std::size_t done, std::size_t total) {
        if (log) log("ensemble: " + std::to_string(done) + "/" + std::to_string(total));
      });

  Table table(config, {"index", "seed", "lifetime", "censored", "cause", "label",
                       "long_lived"});
  for (const EnsembleSample& s : samples) {
    table.row({num(s.index), std::to_string(s.seed), num(s.lifetime),
               num(s.censored()), to_string(s.cause), to_string(s.label),
               num(s.long_lived)});
  }
  write_file(dir / "samples.csv", table.text());

  const auto lifetimes = lifetime_samples(samples);
  Table surv(config, {"time", "at_risk", "events", "survival"});
  for (const SurvivalPoint& s : survival_table(lifetimes)) {
    surv.row({num(s.time), num(s.at_risk), num(s.events), num(s.survival)});
  }
  write_file(dir / "survival.csv", surv.text());

  const double tau_s = tau_s_or_nan(p);
  json body{{"alpha", alpha}, {"h", h}, {"n", config.n}, {"tau_s", jnum(tau_s)}};
  body["fractions"] = fractions_json(count_labels(samples), samples.size());
  body["censored"] = count_labels(samples).censored;
  body["lifetime_fit"] = try_fit(lifetimes, std::nullopt);
  if (std::isfinite(tau_s)) {
    const auto origin = static_cast<std::int64_t>(std::floor(config.origin_multiple * tau_s));
    body["puff_lifetime_fit"] = try_fit(lifetimes, origin);
  } else {
    body["puff_lifetime_fit"] = json{{"error", "tau_s undefined for h <= 2"}};
  }
  write_file(dir / "lifetime_fit.json", document(config, body));
  return body.dump();
}

namespace {

struct MeasuredVelocities {
  std::vector<double> leading;
  std::vector<double> trailing;
};

// Edge velocities of the runs still alive at the end of the window.
MeasuredVelocities measure_velocities(const SweepConfig& c, const ModelParams& p,
                                      std::uint64_t master, unsigned threads) {
  EnsembleOptions o = ensemble_options(c, p, master, threads);
  o.velocity_window = std::make_pair(c.velocity_begin, c.velocity_end);
  o.width_limit = 0;
  MeasuredVelocities out;
  for (const EnsembleSample& s : run_ensemble(p, o)) {
    if (!s.has_velocities()) continue;
    out.leading.push_back(s.v_l);
    out.trailing.push_back(s.v_t);
  }
  return out;
}

}  // namespace

std::string cmd_velocities(const SweepConfig& config, const LogFn& log) {
  validate(config);
  const fs::path dir = output_dir(config);
  const SaddleNode sn = find_saddle_node(config.delta);
  const auto alphas = config.alpha.values();
  const auto hs = config.h.values();
  const std::uint64_t lead_master = derive_seed(config.seed, 0);
  const std::uint64_t trail_master = derive_seed(config.seed, 1);

  std::vector<VelocitySeries> lead(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const ModelParams p = params_at(config, alphas[i], config.leading_h);
    const auto m = with_cell(alphas[i], config.leading_h, [&] {
      return measure_velocities(config, p, derive_seed(lead_master, i), config.threads);
    });
    lead[i] = {alphas[i], m.leading};
    if (log) log("velocities: leading " + std::to_string(i + 1) + "/" + std::to_string(alphas.size()));
  }
  const double trailing_alpha = sn.alpha_sn + config.trailing_alpha_offset;
  std::vector<VelocitySeries> trail(hs.size());
  for (std::size_t j = 0; j < hs.size(); ++j) {
    const ModelParams p = params_at(config, trailing_alpha, hs[j]);
    const auto m = with_cell(trailing_alpha, hs[j], [&] {
      return measure_velocities(config, p, derive_seed(trail_master, j), config.threads);
    });
    trail[j] = {hs[j], m.trailing};
    if (log) log("velocities: trailing " + std::to_string(j + 1) + "/" + std::to_string(hs.size()));
  }
  const VelocityTables tables = aggregate_velocity_curves(lead, trail);

  Table tl(config, {"alpha", "delta_alpha", "v_l", "std", "n_measured", "n"});
  std::vector<double> lx, lv;
  for (const VelocityRow& r : tables.leading) {
    tl.row({num(r.key), num(sn.alpha_sn - r.key), num(r.mean), num(r.stddev),
            num(r.n), num(config.n)});
    if (r.n > 0) {
      lx.push_back(r.key);
      lv.push_back(r.mean);
    }
  }
  write_file(dir / "v_leading.csv", tl.text());

  Table tt(config, {"h", "v_t", "std", "n_measured", "n", "bound", "bound_ok",
                    "relative_gap"});
  std::vector<double> tx, tv;
  std::size_t violations = 0;
  for (const VelocityRow& r : tables.trailing) {
    tt.row({num(r.key), num(r.mean), num(r.stddev), num(r.n), num(config.n),
            num(r.bound), num(r.bound_ok), num(r.relative_gap)});
    violations += !r.bound_ok;
    if (r.n > 0) {
      tx.push_back(r.key);
      tv.push_back(r.mean);
    }
  }
  write_file(dir / "v_trailing.csv", tt.text());

  Table tr(config, {"h", "v_t", "alpha_P", "alpha_PS", "truncated",
                    "alpha_PS_theory"});
  std::vector<double> h_line;
  for (const double h : tx) {
    if (h > kCriticalSlope) h_line.push_back(h);
  }
  std::size_t resolved = 0;
  if (lx.size() >= 2 && tx.size() >= 2 && !h_line.empty()) {
    const VelocityCurve leading = sampled_curve(lx, lv);
    const VelocityCurve trailing = sampled_curve(tx, tv);
    const VelocityCurve theory = theoretical_leading_curve(sn, config.start, 1.0);
    const TransitionCurves line =
        transition_line_puff_slug(h_line, config.delta, leading, trailing);
    for (std::size_t k = 0; k < line.alpha_PS.size(); ++k) {
      const TransitionPoint& pt = line.alpha_PS[k];
      const auto a_th = invert_curve(theory, pt.velocity);
      tr.row({num(pt.h), num(pt.velocity), num(line.alpha_P[k].second),
              num(pt.alpha), num(pt.truncated), num(a_th.value_or(kNaN))});
      resolved += !pt.truncated;
    }
  }
  write_file(dir / "transition_line.csv", tr.text());

  json body{{"alpha_sn", sn.alpha_sn},
            {"trailing_alpha", trailing_alpha},
            {"leading_points", lx.size()},
            {"trailing_points", tx.size()},
            {"bound_violations", violations},
            {"transition_points", resolved}};
  return body.dump();
}

std::string cmd_thresholds(const SweepConfig& config, const LogFn& log) {
  validate(config);
  const fs::path dir = output_dir(config);
  const SaddleNode sn = find_saddle_node(config.delta);

  Table table(config, {"h", "x2", "alpha_P", "scan_below", "scan_above", "probes"});
  json rows = json::array();
  for (const double h : config.h.values()) {
    const ModelParams p{0.0, h, config.delta};
    const double x2 = onsite_fixed_points(p).x2.x;
    const double ap = with_cell(0.0, h, [&] { return alpha_puff_threshold(p); });
    ThresholdScan scan{kNaN, kNaN, 0};
    if (config.scan_step > 0.0) {
      scan = with_cell(ap, h, [&] {
        // Grid on multiples of the step, so no probe sits on alpha_P itself.
        const double lo = std::max(
            0.0, std::floor((ap - config.scan_halfwidth) / config.scan_step) *
                     config.scan_step);
        return scan_puff_threshold(p, lo, ap + config.scan_halfwidth,
                                   config.scan_step, config.scan_horizon);
      });
    }
    table.row({num(h), num(x2), num(ap), num(scan.alpha_below),
               num(scan.alpha_above), std::to_string(scan.probes)});
    rows.push_back({{"h", h},
                    {"x2", x2},
                    {"alpha_P", ap},
                    {"scan_below", jnum(scan.alpha_below)},
                    {"scan_above", jnum(scan.alpha_above)}});
    if (log) log("thresholds: h=" + format_double(h));
  }
  write_file(dir / "alpha_p.csv", table.text());

  json body{{"delta", config.delta},
            {"alpha_sn", sn.alpha_sn},
            {"x_fixed", sn.x_fixed},
            {"value_residual", sn.value_residual},
            {"slope_residual", sn.slope_residual},
            {"alpha_P", rows}};
  write_file(dir / "thresholds.json", document(config, body));
  body.erase("alpha_P");
  return body.dump();
}

namespace {

json compute_cell(const SweepConfig& c, double alpha, double h, std::size_t index) {
  const std::uint64_t seed = derive_seed(c.seed, index);
  json cell{{"alpha", alpha}, {"h", h}, {"index", index}, {"seed", seed}};
  if (!(h > kCriticalSlope)) {
    cell["status"] = "skipped";
    cell["reason"] = "h <= 2: single sites never decay, lifetimes are unbounded";
    return cell;
  }
  const ModelParams p = params_at(c, alpha, h);
  const double tau_s = single_site_lifetime_theory(p);
  const auto samples = with_cell(alpha, h, [&] {
    return run_ensemble(p, ensemble_options(c, p, seed, 1));
  });
  const LabelCounts counts = count_labels(samples);
  const json fit = try_fit(lifetime_samples(samples), std::nullopt);
  const bool estimable = !fit.contains("error");
  const double tau = estimable ? from_jnum(fit["tau"]) : kNaN;
  const bool slug = 2 * counts.slug > samples.size();
  const double ll = c.rules.long_lived_multiple * tau_s;
  const bool long_lived =
      !slug && (estimable ? tau > ll : static_cast<double>(c.max_time) > ll);

  cell["status"] = "computed";
  cell["tau_s"] = tau_s;
  cell["tau"] = jnum(tau);
  cell["tau_lo"] = estimable ? fit["tau_lo"] : json(nullptr);
  cell["tau_hi"] = estimable ? fit["tau_hi"] : json(nullptr);
  cell["sample_mean"] = estimable ? fit["sample_mean"] : json(nullptr);
  cell["events"] = estimable ? fit["events"] : json(0);
  cell["censored"] = counts.censored;
  cell["fractions"] = fractions_json(counts, samples.size());
  cell["long_lived"] = long_lived;
  cell["slug"] = slug;
  return cell;
}

}  // namespace

std::string cmd_phase_diagram(const SweepConfig& config, const LogFn& log) {
  validate(config);
  const fs::path dir = output_dir(config);
  const fs::path cells_dir = dir / "cells";
  std::error_code ec;
  fs::create_directories(cells_dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create '" + cells_dir.string() + "'");

  const auto alphas = config.alpha.values();
  const auto hs = config.h.values();
  const std::size_t total = alphas.size() * hs.size();
  const json cfg_json = json::parse(config_to_json(config));
  std::vector<json> cells(total);
  std::vector<char> reused(total, 0);
  std::mutex log_mutex;
  std::size_t done = 0;

  parallel_for(total, config.threads, [&](std::size_t k) {
    const std::size_t i = k / hs.size();
    const std::size_t j = k % hs.size();
    const fs::path file = cells_dir / ("a" + std::to_string(i) + "_h" + std::to_string(j) + ".json");
    if (config.resume && fs::exists(file)) {
      try {
        json stored = json::parse(read_file(file));
        if (stored.value("config", json()) == cfg_json &&
            stored.value("index", std::size_t{total}) == k) {
          stored.erase("config");
          cells[k] = std::move(stored);
          reused[k] = 1;
        }
      } catch (const json::exception&) {
        // Unreadable leftovers are recomputed.
      }
    }
    if (!reused[k]) {
      cells[k] = compute_cell(config, alphas[i], hs[j], k);
      write_file(file, document(config, cells[k]));
    }
    if (log) {
      std::lock_guard lock(log_mutex);
      ++done;
      log("phase-diagram: cell " + std::to_string(done) + "/" + std::to_string(total) +
          (reused[k] ? " (reused)" : ""));
    }
  });

  Table grid(config, {"alpha", "h", "status", "tau_s", "tau", "tau_lo", "tau_hi",
                      "sample_mean", "frac_decay", "frac_puff", "frac_slug",
                      "frac_long_lived", "long_lived", "slug", "reason"});
  Table slice(config, {"alpha", "h", "tau", "tau_lo", "tau_hi", "tau_s"});
  std::size_t skipped = 0;
  for (const json& cell : cells) {
    const auto g = [&](const char* key) {
      return cell.contains(key) ? num(from_jnum(cell[key])) : std::string("nan");
    };
    const auto fr = [&](const char* key) {
      return cell.contains("fractions") ? num(cell["fractions"][key].get<double>())
                                        : std::string("nan");
    };
    const bool computed = cell["status"] == "computed";
    skipped += !computed;
    grid.row({g("alpha"), g("h"), cell["status"].get<std::string>(), g("tau_s"),
              g("tau"), g("tau_lo"), g("tau_hi"), g("sample_mean"), fr("decay"),
              fr("puff"), fr("slug"), fr("long_lived"),
              num(computed && cell["long_lived"].get<bool>()),
              num(computed && cell["slug"].get<bool>()),
              cell.value("reason", std::string())});
    if (cell["h"].get<double>() == config.slice_h) {
      slice.row({g("alpha"), g("h"), g("tau"), g("tau_lo"), g("tau_hi"), g("tau_s")});
    }
  }
  write_file(dir / "phase_diagram.csv", grid.text());
  write_file(dir / "slice_h.csv", slice.text());

  // Overlay: closed-form alpha_P(h) and the transition line obtained from
  // the leading-edge law and the trailing-edge bound ln(h/2).
  const SaddleNode sn = find_saddle_node(config.delta);
  const VelocityCurve leading = theoretical_leading_curve(sn, config.start, 1.0);
  Table overlay(config, {"h", "alpha_P", "alpha_PS_theory"});
  for (const double h : hs) {
    if (!(h > kCriticalSlope)) continue;
    const double ap = alpha_puff_threshold({0.0, h, config.delta});
    const auto aps = invert_curve(leading, trailing_velocity_theory(h));
    overlay.row({num(h), num(ap), num(aps.value_or(kNaN))});
  }
  write_file(dir / "overlay.csv", overlay.text());

  std::size_t reused_count = 0;
  for (const char r : reused) reused_count += r;
  json body{{"cells", total},
            {"computed", total - skipped},
            {"skipped", skipped},
            {"reused", reused_count}};
  return body.dump();
}

std::string cmd_lifetime_scaling(const SweepConfig& config, const LogFn& log) {
  validate(config);
  const fs::path dir = output_dir(config);
  const auto alphas = config.alpha.values();
  const auto hs = config.h.values();

  Table table(config, {"alpha", "h", "tau_s", "tau", "tau_lo", "tau_hi", "origin",
                       "events", "censored", "used", "n", "ks_statistic",
                       "ks_p_value"});
  json fits = json::array();
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    std::vector<LifetimePoint> points;
    for (std::size_t j = 0; j < hs.size(); ++j) {
      const double alpha = alphas[i];
      const double h = hs[j];
      if (!(h > kCriticalSlope)) {
        fail(ErrorCode::domain, "cell " + cell_name(alpha, h) + ": lifetime scaling needs h > 2");
      }
      const ModelParams p = params_at(config, alpha, h);
      const double tau_s = single_site_lifetime_theory(p);
      const auto origin = static_cast<std::int64_t>(std::floor(config.origin_multiple * tau_s));
      const std::uint64_t seed = derive_seed(config.seed, i * hs.size() + j);
      const ExponentialFit fit = with_cell(alpha, h, [&] {
        const auto samples = run_ensemble(p, ensemble_options(config, p, seed, config.threads));
        return fit_exponential_lifetimes(lifetime_samples(samples), origin);
      });
      table.row({num(alpha), num(h), num(tau_s), num(fit.mean), num(fit.mean_lo),
                 num(fit.mean_hi), num(fit.origin), num(fit.events),
                 num(fit.censored), num(fit.used), num(config.n),
                 num(fit.ks_statistic), num(fit.ks_p_value)});
      if (std::isfinite(fit.mean) && fit.mean > 0.0) points.push_back({h, fit.mean});
      if (log) log("lifetime-scaling: " + cell_name(alpha, h) + " tau=" + format_double(fit.mean, 4));
    }
    json entry{{"alpha", alphas[i]}};
    try {
      const ScalingFit sf = fit_superexponential(points);
      entry["B"] = sf.B;
      entry["C"] = sf.C;
      entry["r_squared"] = sf.r_squared;
      json pts = json::array();
      for (std::size_t k = 0; k < points.size(); ++k) {
        pts.push_back({{"h", points[k].h},
                       {"tau_s", sf.tau_s[k]},
                       {"tau", points[k].tau},
                       {"residual", sf.residuals[k]}});
      }
      entry["points"] = pts;
    } catch (const Error& e) {
      entry["error"] = e.what();
    }
    fits.push_back(entry);
  }
  write_file(dir / "lifetimes.csv", table.text());
  json body{{"fits", fits}};
  write_file(dir / "scaling_fit.json", document(config, body));
  return body.dump();
}

namespace {

std::vector<VelocityPoint> read_leading_table(const std::string& path,
                                              const SaddleNode& sn) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<VelocityPoint> points;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    if (header.empty()) {
      header = cells;
      continue;
    }
    const auto col = [&](const char* name) -> std::optional<double> {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) return std::nullopt;
      const auto k = static_cast<std::size_t>(it - header.begin());
      if (k >= cells.size()) return std::nullopt;
      return parse_double(cells[k] == "nan" ? "NaN" : cells[k]);
    };
    const auto v = col("v_l");
    auto da = col("delta_alpha");
    if (!da) {
      if (const auto a = col("alpha")) da = sn.alpha_sn - *a;
    }
    if (!v || !da) {
      fail(ErrorCode::invalid_argument,
           "'" + path + "' needs v_l and alpha or delta_alpha columns");
    }
    if (std::isfinite(*v) && *da > 0.0) points.push_back({*da, *v});
  }
  return points;
}

}  // namespace

std::string cmd_fit_intermittency(const SweepConfig& config, const LogFn& log) {
  validate(config);
  const fs::path dir = output_dir(config);
  const SaddleNode sn = find_saddle_node(config.delta);
  std::vector<VelocityPoint> points;
  std::string source;
  if (!config.input.empty()) {
    points = read_leading_table(config.input, sn);
    source = "table";
  } else {
    const double h = single_value(config.h, "h");
    const auto das = config.delta_alpha.values();
    for (std::size_t i = 0; i < das.size(); ++i) {
      const double alpha = sn.alpha_sn - das[i];
      const ModelParams p = params_at(config, alpha, h);
      const auto m = with_cell(alpha, h, [&] {
        return measure_velocities(config, p, derive_seed(config.seed, i), config.threads);
      });
      const auto& vl = m.leading;
      if (!vl.empty()) {
        RunningStats st;
        for (const double v : vl) st.add(v);
        points.push_back({das[i], st.mean()});
      }
      if (log) log("fit-intermittency: " + std::to_string(i + 1) + "/" + std::to_string(das.size()));
    }
    source = "measured";
  }

  const IntermittencyRefit refit = refit_intermittency_constants(points, config.start);
  json pts = json::array();
  for (std::size_t k = 0; k < points.size(); ++k) {
    pts.push_back({{"delta_alpha", points[k].delta_alpha},
                   {"v_l", points[k].v},
                   {"model", points[k].v + refit.residuals[k]},
                   {"start_model", leading_velocity_theory(sn.alpha_sn - points[k].delta_alpha,
                                                           sn, config.start)}});
  }
  const IntermittencyFit& f = refit.fit;
  json body{{"source", source},
            {"alpha_sn", sn.alpha_sn},
            {"a", f.a},
            {"nu_c", f.nu_c},
            {"A", f.A},
            {"xi", f.xi},
            {"a_nu_c", f.a * f.nu_c},
            {"a_A", f.a * f.A},
            {"converged", refit.converged},
            {"iterations", refit.iterations},
            {"residual", refit.rms},
            {"max_abs_residual", refit.max_abs_residual},
            {"points", pts},
            {"cost_trace", refit.cost_trace}};
  write_file(dir / "intermittency_fit.json", document(config, body));
  body.erase("points");
  body.erase("cost_trace");
  return body.dump();
}

}  // namespace ucml
