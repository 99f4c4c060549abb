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

#include "ucml/ucml.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "ucml/bifurcation.hpp"
#include "ucml/error.hpp"
#include "ucml/simulation.hpp"
#include "ucml/statistics.hpp"
#include "ucml/sweep.hpp"

struct ucml_lattice {
  ucml::Lattice lattice;
};

struct ucml_trajectory {
  ucml::TrajectoryRecord record;
  ucml::ModelParams params;
};

struct ucml_ensemble {
  std::vector<ucml::EnsembleSample> samples;
};

struct ucml_config {
  ucml::SweepConfig config;
};

namespace {

thread_local std::string last_error;

ucml_status record(ucml_status status, const char* what) {
  last_error = what;
  return status;
}

template <class F>
ucml_status guarded(F&& f) noexcept {
  try {
    f();
    return UCML_OK;
  } catch (const ucml::Error& e) {
    return record(static_cast<ucml_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return record(UCML_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(UCML_ERR_INTERNAL, e.what());
  } catch (...) {
    return record(UCML_ERR_INTERNAL, "unknown error");
  }
}

template <class T>
T& deref(T* p, const char* name) {
  if (!p) ucml::fail(ucml::ErrorCode::invalid_argument, std::string(name) + " is NULL");
  return *p;
}

std::string str(const char* p, const char* name) {
  if (!p) ucml::fail(ucml::ErrorCode::invalid_argument, std::string(name) + " is NULL");
  return p;
}

ucml::ModelParams to_cpp(const ucml_params* p) {
  const ucml_params& c = deref(p, "params");
  return {c.alpha, c.h, c.delta};
}

ucml::IntermittencyFit to_cpp(const ucml_intermittency* f) {
  if (!f) return {};
  return {f->a, f->nu_c, f->A, f->xi};
}

ucml::InitialCondition to_cpp(const ucml_ic* ic) {
  const ucml_ic& c = deref(ic, "ic");
  ucml::InitialCondition out;
  switch (c.kind) {
    case UCML_IC_SINGLE_SITE: out.kind = ucml::IcKind::single_site; break;
    case UCML_IC_FIXED_KICK: out.kind = ucml::IcKind::fixed_kick; break;
    case UCML_IC_MULTI_SITE: out.kind = ucml::IcKind::multi_site; break;
    case UCML_IC_EXPLICIT: out.kind = ucml::IcKind::explicit_profile; break;
    default: ucml::fail(ucml::ErrorCode::invalid_argument, "unknown ic kind");
  }
  out.value = c.value;
  out.count = c.count;
  out.jitter = c.jitter;
  if (c.profile_len > 0) {
    deref(c.profile, "ic.profile");
    out.profile.assign(c.profile, c.profile + c.profile_len);
  }
  out.seed = c.seed;
  return out;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_double_key(ucml::SweepConfig& c, const std::string& key, double v) {
  if (key == "delta") c.delta = v;
  else if (key == "ic_value") c.ic_value = v;
  else if (key == "ic_jitter") c.ic_jitter = v;
  else if (key == "leading_h") c.leading_h = v;
  else if (key == "trailing_alpha_offset") c.trailing_alpha_offset = v;
  else if (key == "slice_h") c.slice_h = v;
  else if (key == "origin_multiple") c.origin_multiple = v;
  else if (key == "scan_halfwidth") c.scan_halfwidth = v;
  else if (key == "scan_step") c.scan_step = v;
  else if (key == "decay_multiple") c.rules.decay_multiple = v;
  else if (key == "long_lived_multiple") c.rules.long_lived_multiple = v;
  else if (key == "slug_margin") c.rules.slug_margin = v;
  else if (key == "start_a") c.start.a = v;
  else if (key == "start_nu_c") c.start.nu_c = v;
  else if (key == "start_A") c.start.A = v;
  else if (key == "start_xi") c.start.xi = v;
  else if (key == "alpha") c.alpha = ucml::Axis::single(v);
  else if (key == "h") c.h = ucml::Axis::single(v);
  else ucml::fail(ucml::ErrorCode::invalid_argument, "unknown real key '" + key + "'");
}

void set_int_key(ucml::SweepConfig& c, const std::string& key, std::int64_t v) {
  const auto nonneg = [&] {
    if (v < 0) ucml::fail(ucml::ErrorCode::invalid_argument, key + " must be >= 0");
    return v;
  };
  if (key == "n") c.n = static_cast<std::size_t>(nonneg());
  else if (key == "max_time") c.max_time = v;
  else if (key == "ic_count") c.ic_count = static_cast<int>(v);
  else if (key == "width_limit") c.width_limit = v;
  else if (key == "velocity_begin") c.velocity_begin = v;
  else if (key == "velocity_end") c.velocity_end = v;
  else if (key == "slug_window") c.rules.slug_window = v;
  else if (key == "scan_horizon") c.scan_horizon = static_cast<int>(v);
  else if (key == "precision") c.precision = static_cast<int>(v);
  else if (key == "threads") c.threads = static_cast<unsigned>(nonneg());
  else if (key == "resume") c.resume = v != 0;
  else ucml::fail(ucml::ErrorCode::invalid_argument, "unknown integer key '" + key + "'");
}

void set_string_key(ucml::SweepConfig& c, const std::string& key,
                    const std::string& v) {
  if (key == "alpha") c.alpha = ucml::Axis::parse(v);
  else if (key == "h") c.h = ucml::Axis::parse(v);
  else if (key == "delta_alpha") c.delta_alpha = ucml::Axis::parse(v);
  else if (key == "ic") c.ic = ucml::ic_kind_from_string(v);
  else if (key == "ic_profile") c.ic_profile = ucml::Axis::parse(v).values();
  else if (key == "out") c.out = v;
  else if (key == "input") c.input = v;
  else ucml::fail(ucml::ErrorCode::invalid_argument, "unknown text key '" + key + "'");
}

}  // namespace

extern "C" {

const char* ucml_version(void) { return "1.0.0"; }

const char* ucml_status_string(ucml_status status) {
  switch (status) {
    case UCML_OK: return "ok";
    case UCML_ERR_INVALID_ARGUMENT: return "invalid argument";
    case UCML_ERR_DOMAIN: return "outside the domain of validity";
    case UCML_ERR_NO_ROOT: return "no root in bracket";
    case UCML_ERR_IO: return "input/output error";
    case UCML_ERR_NOT_CONVERGED: return "did not converge";
    case UCML_ERR_INSUFFICIENT_DATA: return "insufficient data";
    case UCML_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ucml_last_error(void) { return last_error.c_str(); }

void ucml_string_free(char* s) { std::free(s); }

ucml_params ucml_default_params(void) {
  const ucml::ModelParams p;
  return {p.alpha, p.h, p.delta};
}

ucml_status ucml_validate_params(const ucml_params* params) {
  return guarded([&] { ucml::validate(to_cpp(params)); });
}

ucml_status ucml_onsite_map(const ucml_params* params, double x, double* out) {
  return guarded([&] {
    const auto p = to_cpp(params);
    ucml::validate(p);
    deref(out, "out") = ucml::onsite_map(x, p);
  });
}

ucml_status ucml_coupling_map(const ucml_params* params, double x, double* out) {
  return guarded([&] {
    const auto p = to_cpp(params);
    ucml::validate(p);
    deref(out, "out") = ucml::coupling_map(x, p);
  });
}

ucml_status ucml_fixed_points(const ucml_params* params, double x[3],
                              int stable[3]) {
  return guarded([&] {
    const auto fp = ucml::onsite_fixed_points(to_cpp(params));
    const ucml::FixedPoint* pts[3] = {&fp.x0, &fp.x1, &fp.x2};
    for (int k = 0; k < 3; ++k) {
      if (x) x[k] = pts[k]->x;
      if (stable) stable[k] = pts[k]->stable ? 1 : 0;
    }
  });
}

ucml_status ucml_single_site_lifetime(const ucml_params* params, double* tau_s) {
  return guarded([&] {
    deref(tau_s, "tau_s") = ucml::single_site_lifetime_theory(to_cpp(params));
  });
}

ucml_intermittency ucml_default_intermittency(void) {
  const ucml::IntermittencyFit f;
  return {f.a, f.nu_c, f.A, f.xi};
}

ucml_status ucml_find_saddle_node(double delta, ucml_saddle_node* out) {
  return guarded([&] {
    const auto sn = ucml::find_saddle_node(delta);
    deref(out, "out") = {sn.alpha_sn, sn.x_fixed, sn.value_residual,
                         sn.slope_residual};
  });
}

ucml_status ucml_alpha_puff_threshold(const ucml_params* params, double* alpha_p) {
  return guarded([&] {
    deref(alpha_p, "alpha_p") = ucml::alpha_puff_threshold(to_cpp(params));
  });
}

ucml_status ucml_scan_puff_threshold(const ucml_params* params, double alpha_lo,
                                     double alpha_hi, double step, int horizon,
                                     double* alpha_below, double* alpha_above) {
  return guarded([&] {
    const auto scan = ucml::scan_puff_threshold(to_cpp(params), alpha_lo,
                                                alpha_hi, step, horizon);
    if (alpha_below) *alpha_below = scan.alpha_below;
    if (alpha_above) *alpha_above = scan.alpha_above;
  });
}

ucml_status ucml_trailing_velocity_theory(double h, double* v_t) {
  return guarded([&] { deref(v_t, "v_t") = ucml::trailing_velocity_theory(h); });
}

ucml_status ucml_leading_velocity_theory(double alpha, double delta,
                                         const ucml_intermittency* fit,
                                         double* v_l) {
  return guarded([&] {
    const auto sn = ucml::find_saddle_node(delta);
    deref(v_l, "v_l") = ucml::leading_velocity_theory(alpha, sn, to_cpp(fit));
  });
}

// ---- lattice

ucml_status ucml_lattice_create(const ucml_params* params, const double* sites,
                                size_t count, ucml_lattice** out) {
  return guarded([&] {
    deref(out, "out") = nullptr;
    if (count > 0) deref(sites, "sites");
    const std::span<const double> init(sites, count);
    *out = new ucml_lattice{ucml::Lattice(to_cpp(params), init)};
  });
}

void ucml_lattice_destroy(ucml_lattice* lattice) { delete lattice; }

ucml_status ucml_lattice_advance(ucml_lattice* lattice, int64_t steps) {
  return guarded([&] {
    auto& l = deref(lattice, "lattice").lattice;
    if (steps < 0) ucml::fail(ucml::ErrorCode::invalid_argument, "steps must be >= 0");
    for (int64_t s = 0; s < steps; ++s) l.advance();
  });
}

ucml_status ucml_lattice_state(const ucml_lattice* lattice, int64_t* time,
                               int* laminar, int64_t* leading,
                               int64_t* trailing) {
  return guarded([&] {
    const auto& l = deref(lattice, "lattice").lattice;
    if (time) *time = l.time();
    if (laminar) *laminar = l.laminar() ? 1 : 0;
    if (leading) *leading = l.laminar() ? -1 : l.leading();
    if (trailing) *trailing = l.laminar() ? -1 : l.trailing();
  });
}

ucml_status ucml_lattice_value(const ucml_lattice* lattice, int64_t site,
                               double* value) {
  return guarded([&] {
    deref(value, "value") = deref(lattice, "lattice").lattice.at(site);
  });
}

// ---- trajectories

ucml_ic ucml_default_ic(void) {
  return {UCML_IC_SINGLE_SITE, 0.0, 1, nullptr, 0, 0, 0.0};
}

ucml_status ucml_run_trajectory(const ucml_params* params, const ucml_ic* ic,
                                int64_t max_time, ucml_trajectory** out) {
  return guarded([&] {
    deref(out, "out") = nullptr;
    const auto p = to_cpp(params);
    auto rec = ucml::run_trajectory(p, to_cpp(ic), max_time);
    *out = new ucml_trajectory{std::move(rec), p};
  });
}

void ucml_trajectory_destroy(ucml_trajectory* trajectory) { delete trajectory; }

ucml_status ucml_trajectory_info(const ucml_trajectory* trajectory,
                                 int64_t* lifetime, ucml_cause* cause,
                                 size_t* steps) {
  return guarded([&] {
    const auto& r = deref(trajectory, "trajectory").record;
    if (lifetime) *lifetime = r.lifetime;
    if (cause) *cause = static_cast<ucml_cause>(r.cause);
    if (steps) *steps = r.leading.size();
  });
}

ucml_status ucml_trajectory_edges(const ucml_trajectory* trajectory,
                                  int64_t* leading, int64_t* trailing,
                                  int64_t* active, size_t cap) {
  return guarded([&] {
    const auto& r = deref(trajectory, "trajectory").record;
    const size_t n = std::min(cap, r.leading.size());
    for (size_t i = 0; i < n; ++i) {
      if (leading) leading[i] = r.leading[i];
      if (trailing) trailing[i] = r.trailing[i];
      if (active) active[i] = r.active[i];
    }
  });
}

ucml_status ucml_trajectory_velocities(const ucml_trajectory* trajectory,
                                       int64_t begin, int64_t end, double* v_l,
                                       double* v_t) {
  return guarded([&] {
    const auto v = ucml::measure_edge_velocities(
        deref(trajectory, "trajectory").record, begin, end);
    if (v_l) *v_l = v.leading;
    if (v_t) *v_t = v.trailing;
  });
}

ucml_status ucml_trajectory_classify(const ucml_trajectory* trajectory,
                                     ucml_classification* out) {
  return guarded([&] {
    const auto& t = deref(trajectory, "trajectory");
    const auto c = ucml::classify(t.record, t.params);
    deref(out, "out") = {static_cast<ucml_label>(c.label), c.long_lived ? 1 : 0,
                         c.v_l, c.v_t, c.width_slope};
  });
}

// ---- ensembles

ucml_status ucml_run_ensemble(const ucml_params* params, const ucml_ic* ic,
                              const ucml_ensemble_options* options,
                              ucml_ensemble** out) {
  return guarded([&] {
    deref(out, "out") = nullptr;
    const auto& o = deref(options, "options");
    ucml::EnsembleOptions eo;
    eo.n = o.n;
    eo.master_seed = o.master_seed;
    eo.ic = to_cpp(ic);
    eo.max_time = o.max_time;
    eo.width_limit = o.width_limit;
    eo.threads = o.threads;
    auto samples = ucml::run_ensemble(to_cpp(params), eo);
    *out = new ucml_ensemble{std::move(samples)};
  });
}

void ucml_ensemble_destroy(ucml_ensemble* ensemble) { delete ensemble; }

size_t ucml_ensemble_size(const ucml_ensemble* ensemble) {
  return ensemble ? ensemble->samples.size() : 0;
}

ucml_status ucml_ensemble_sample(const ucml_ensemble* ensemble, size_t index,
                                 ucml_sample* out) {
  return guarded([&] {
    const auto& s = deref(ensemble, "ensemble").samples;
    if (index >= s.size()) {
      ucml::fail(ucml::ErrorCode::invalid_argument, "sample index out of range");
    }
    const auto& x = s[index];
    deref(out, "out") = {x.seed, x.lifetime, static_cast<ucml_cause>(x.cause),
                         static_cast<ucml_label>(x.label), x.long_lived ? 1 : 0};
  });
}

ucml_status ucml_ensemble_fit(const ucml_ensemble* ensemble, int64_t origin,
                              ucml_lifetime_fit* out) {
  return guarded([&] {
    const auto samples =
        ucml::lifetime_samples(deref(ensemble, "ensemble").samples);
    const auto f = ucml::fit_exponential_lifetimes(
        samples, origin < 0 ? std::nullopt : std::optional<std::int64_t>(origin));
    deref(out, "out") = {f.rate,   f.rate_lo,     f.rate_hi, f.mean,
                         f.mean_lo, f.mean_hi,    f.sample_mean, f.origin,
                         f.events, f.censored,    f.ks_statistic, f.ks_p_value};
  });
}

// ---- sweeps

ucml_status ucml_config_create(const char* command, ucml_config** out) {
  return guarded([&] {
    deref(out, "out") = nullptr;
    *out = new ucml_config{ucml::default_config(str(command, "command"))};
  });
}

ucml_status ucml_config_from_text(const char* text, ucml_config** out) {
  return guarded([&] {
    deref(out, "out") = nullptr;
    *out = new ucml_config{ucml::config_from_text(str(text, "text"))};
  });
}

void ucml_config_destroy(ucml_config* config) { delete config; }

ucml_status ucml_config_set_double(ucml_config* config, const char* key,
                                   double value) {
  return guarded([&] {
    set_double_key(deref(config, "config").config, str(key, "key"), value);
  });
}

ucml_status ucml_config_set_int(ucml_config* config, const char* key,
                                int64_t value) {
  return guarded([&] {
    set_int_key(deref(config, "config").config, str(key, "key"), value);
  });
}

ucml_status ucml_config_set_seed(ucml_config* config, uint64_t seed) {
  return guarded([&] { deref(config, "config").config.seed = seed; });
}

ucml_status ucml_config_set_string(ucml_config* config, const char* key,
                                   const char* value) {
  return guarded([&] {
    set_string_key(deref(config, "config").config, str(key, "key"),
                   str(value, "value"));
  });
}

ucml_status ucml_config_get_command(const ucml_config* config, char** command) {
  return guarded([&] {
    deref(command, "command") = dup_string(deref(config, "config").config.command);
  });
}

ucml_status ucml_config_to_json(const ucml_config* config, char** json) {
  return guarded([&] {
    deref(json, "json") = dup_string(ucml::config_to_json(deref(config, "config").config, 2));
  });
}

const char* const* ucml_command_names(size_t* count) {
  static const auto names = [] {
    std::vector<const char*> v;
    for (const auto& s : ucml::command_names()) v.push_back(s.c_str());
    return v;
  }();
  if (count) *count = names.size();
  return names.data();
}

ucml_status ucml_run_command(const ucml_config* config, ucml_log_fn log,
                             void* user, char** summary) {
  return guarded([&] {
    ucml::LogFn fn;
    if (log) fn = [log, user](const std::string& m) { log(m.c_str(), user); };
    const std::string s = ucml::run_command(deref(config, "config").config, fn);
    if (summary) *summary = dup_string(s);
  });
}

}  // extern "C"
