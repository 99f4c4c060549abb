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

#include "ucml/simulation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <ostream>
#include <sstream>

#include "ucml/error.hpp"
#include "ucml/parallel.hpp"

namespace ucml {

unsigned default_thread_count() {
  if (const char* env = std::getenv("UCML_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

double spreading_draw(Rng& rng, double delta) {
  const double lo = 1.0 + delta;
  const double hi = 2.0 + delta;
  for (;;) {
    const double x = lo + uniform01(rng);
    if (x > lo && x < hi) return x;
  }
}

namespace {

void check_values(std::span<const double> values) {
  for (const double v : values) {
    if (!std::isfinite(v) || v < 0.0) {
      fail(ErrorCode::invalid_argument,
           "initial site values must be finite and >= 0");
    }
  }
}

}  // namespace

std::vector<double> initial_profile(const InitialCondition& ic,
                                    const ModelParams& params) {
  Rng rng(ic.seed);
  std::vector<double> sites;
  switch (ic.kind) {
    case IcKind::single_site:
      sites.push_back(spreading_draw(rng, params.delta));
      break;
    case IcKind::fixed_kick:
      if (!(ic.jitter >= 0.0)) {
        fail(ErrorCode::invalid_argument, "kick jitter must be >= 0");
      }
      sites.push_back(ic.jitter > 0.0 ? ic.value + ic.jitter * (2.0 * uniform01(rng) - 1.0)
                                      : ic.value);
      break;
    case IcKind::multi_site:
      if (ic.count < 1) {
        fail(ErrorCode::invalid_argument, "multi-site kick needs count >= 1");
      }
      for (int i = 0; i < ic.count; ++i) {
        sites.push_back(spreading_draw(rng, params.delta));
      }
      break;
    case IcKind::explicit_profile:
      sites = ic.profile;
      break;
  }
  check_values(sites);
  return sites;
}

std::string to_string(IcKind kind) {
  switch (kind) {
    case IcKind::single_site: return "single";
    case IcKind::fixed_kick: return "fixed";
    case IcKind::multi_site: return "multi";
    case IcKind::explicit_profile: return "explicit";
  }
  return "?";
}

IcKind ic_kind_from_string(const std::string& name) {
  if (name == "single") return IcKind::single_site;
  if (name == "fixed") return IcKind::fixed_kick;
  if (name == "multi") return IcKind::multi_site;
  if (name == "explicit") return IcKind::explicit_profile;
  fail(ErrorCode::invalid_argument, "unknown initial condition '" + name + "'");
}

std::string to_string(Termination cause) {
  switch (cause) {
    case Termination::decayed: return "decayed";
    case Termination::max_time: return "max_time";
    case Termination::width_limit: return "width_limit";
  }
  return "?";
}

std::string to_string(Label label) {
  switch (label) {
    case Label::decay: return "decay";
    case Label::puff: return "puff";
    case Label::slug: return "slug";
  }
  return "?";
}

// ---------------------------------------------------------------------------

Lattice::Lattice(const ModelParams& params, std::span<const double> initial,
                 const EngineOptions& options)
    : params_(params), guard_band_(std::max<std::int64_t>(options.guard_band, 1)) {
  validate(params);
  check_values(initial);
  const std::size_t size =
      std::max(options.initial_capacity,
               initial.size() + static_cast<std::size_t>(guard_band_) + 1);
  cells_.assign(size, 0.0);
  std::copy(initial.begin(), initial.end(), cells_.begin());
  const auto n = static_cast<std::int64_t>(initial.size());
  for (std::int64_t i = 0; i < n; ++i) {
    if (cells_[i] > 0.0) {
      if (laminar_) lo_ = i;
      hi_ = i;
      laminar_ = false;
    }
  }
}

void Lattice::grow() {
  const std::size_t want = static_cast<std::size_t>(hi_ + guard_band_ + 2);
  cells_.resize(std::max(cells_.size() * 2, want), 0.0);
}

void Lattice::trim() {
  double* c = cells_.data();
  std::copy(c + lo_, c + hi_ + 1, c);
  std::fill(c + (hi_ - lo_ + 1), c + hi_ + 1, 0.0);
  origin_ += lo_;
  hi_ -= lo_;
  lo_ = 0;
}

void Lattice::advance() {
  ++time_;
  if (laminar_) return;
  if (hi_ + guard_band_ >= static_cast<std::int64_t>(cells_.size())) grow();

  // Everything left of lo_ is zero and stays zero; the front can move at
  // most one site, so only [lo_, hi_ + 1] changes.
  const std::int64_t b = lo_;
  const std::int64_t e = hi_ + 1;
  const auto n = static_cast<std::size_t>(e - b + 1);
  if (kicks_.size() < n) kicks_.resize(std::max(n, 2 * kicks_.size()));

  const double alpha = params_.alpha;
  const double h = params_.h;
  const double d = params_.delta;
  double* const c = cells_.data() + b;
  double* const k = kicks_.data();
  // Two passes: all couplings read the old field before any site is written.
  k[0] = alpha * coupling(b > 0 ? c[-1] : 0.0, d);
  for (std::size_t i = 1; i < n; ++i) k[i] = alpha * coupling(c[i - 1], d);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = k[i] + onsite(c[i], h, d);
    c[i] = v > 0.0 ? v : 0.0;
  }

  std::int64_t lo = b;
  while (lo <= e && !(cells_[lo] > 0.0)) ++lo;
  if (lo > e) {
    laminar_ = true;
    return;
  }
  std::int64_t hi = e;
  while (!(cells_[hi] > 0.0)) --hi;
  lo_ = lo;
  hi_ = hi;
  if (lo_ >= 4096 && static_cast<std::size_t>(lo_) * 2 >= cells_.size()) trim();
}

std::int64_t Lattice::active_sites() const {
  if (laminar_) return 0;
  std::int64_t count = 0;
  for (std::int64_t i = lo_; i <= hi_; ++i) count += cells_[i] > 0.0 ? 1 : 0;
  return count;
}

double Lattice::at(std::int64_t site) const {
  const std::int64_t i = site - origin_;
  if (laminar_ || i < 0 || i >= static_cast<std::int64_t>(cells_.size())) {
    return 0.0;
  }
  return cells_[static_cast<std::size_t>(i)];
}

// ---------------------------------------------------------------------------

void EdgeFit::add(double t, double leading, double trailing) {
  ++n_;
  const double inv = 1.0 / static_cast<double>(n_);
  const double dt = t - mean_t_;
  mean_t_ += dt * inv;
  mean_l_ += (leading - mean_l_) * inv;
  mean_r_ += (trailing - mean_r_) * inv;
  // Co-moments updated with the post-update means (Welford).
  m_tt_ += dt * (t - mean_t_);
  c_tl_ += dt * (leading - mean_l_);
  c_tr_ += dt * (trailing - mean_r_);
}

double EdgeFit::leading_slope() const {
  return n_ >= 2 && m_tt_ > 0.0 ? c_tl_ / m_tt_
                                : std::numeric_limits<double>::quiet_NaN();
}

double EdgeFit::trailing_slope() const {
  return n_ >= 2 && m_tt_ > 0.0 ? c_tr_ / m_tt_
                                : std::numeric_limits<double>::quiet_NaN();
}

TrajectoryRecord run_trajectory(const ModelParams& params,
                                const InitialCondition& ic,
                                std::int64_t max_time,
                                const EngineOptions& options,
                                const StepObserver& observer) {
  if (max_time < 1) {
    fail(ErrorCode::invalid_argument, "max_time must be >= 1");
  }
  const std::vector<double> init = initial_profile(ic, params);
  Lattice lattice(params, init, options);

  TrajectoryRecord rec;
  rec.seed = ic.seed;
  const bool fit = options.fit_begin >= 0 && options.fit_end >= options.fit_begin;
  const auto note = [&](std::int64_t t) {
    const std::int64_t lead = lattice.leading();
    const std::int64_t trail = lattice.trailing();
    if (options.record_edges) {
      rec.leading.push_back(lead);
      rec.trailing.push_back(trail);
      rec.active.push_back(lattice.active_sites());
    }
    if (fit && t >= options.fit_begin && t <= options.fit_end) {
      rec.window_fit.add(static_cast<double>(t), static_cast<double>(lead),
                         static_cast<double>(trail));
    }
  };

  if (observer) observer(lattice);
  if (lattice.laminar()) {
    rec.lifetime = 0;
    rec.cause = Termination::decayed;
    return rec;
  }
  note(0);
  for (std::int64_t t = 1; t <= max_time; ++t) {
    lattice.advance();
    if (observer) observer(lattice);
    if (lattice.laminar()) {
      rec.lifetime = t;
      rec.cause = Termination::decayed;
      return rec;
    }
    note(t);
    if (options.width_limit > 0 &&
        lattice.leading() - lattice.trailing() + 1 > options.width_limit) {
      rec.lifetime = t;
      rec.cause = Termination::width_limit;
      return rec;
    }
  }
  rec.lifetime = max_time;
  rec.cause = Termination::max_time;
  return rec;
}

EdgeVelocities measure_edge_velocities(const TrajectoryRecord& record,
                                       std::int64_t begin, std::int64_t end) {
  if (end - begin < 10 || begin < 0) {
    fail(ErrorCode::invalid_argument,
         "velocity window must span at least 10 steps");
  }
  if (static_cast<std::int64_t>(record.leading.size()) < end) {
    fail(ErrorCode::invalid_argument,
         "record is not active over the whole velocity window");
  }
  EdgeFit fit;
  for (std::int64_t t = begin; t < end; ++t) {
    fit.add(static_cast<double>(t), static_cast<double>(record.leading[t]),
            static_cast<double>(record.trailing[t]));
  }
  return {fit.leading_slope(), fit.trailing_slope()};
}

std::pair<std::int64_t, std::int64_t> classification_window(
    std::int64_t t_end, const ClassificationRules& rules) {
  const std::int64_t span = std::max(rules.slug_window, t_end / 2);
  return {std::max<std::int64_t>(0, t_end - span), t_end};
}

Classification classify(const TrajectoryRecord& record,
                        const ModelParams& params,
                        const ClassificationRules& rules) {
  const double tau_s = params.h > kCriticalSlope
                           ? single_site_lifetime_theory(params)
                           : std::numeric_limits<double>::infinity();
  const auto tau = static_cast<double>(record.lifetime);
  Classification out;
  out.long_lived = tau > rules.long_lived_multiple * tau_s;

  if (!record.censored()) {
    out.label = tau <= rules.decay_multiple * tau_s ? Label::decay : Label::puff;
    return out;
  }

  const auto [b, e] = classification_window(record.lifetime, rules);
  if (static_cast<std::int64_t>(record.leading.size()) > e && e + 1 - b >= 10) {
    const EdgeVelocities v = measure_edge_velocities(record, b, e + 1);
    out.v_l = v.leading;
    out.v_t = v.trailing;
  } else if (record.window_fit.count() >= 10) {
    out.v_l = record.window_fit.leading_slope();
    out.v_t = record.window_fit.trailing_slope();
  }
  out.width_slope = out.v_l - out.v_t;

  if (record.cause == Termination::width_limit) {
    out.label = Label::slug;
  } else if (e - b >= rules.slug_window && out.width_slope > rules.slug_margin) {
    out.label = Label::slug;
  } else {
    out.label = Label::puff;
  }
  return out;
}

std::vector<EnsembleSample> run_ensemble(const ModelParams& params,
                                         const EnsembleOptions& options,
                                         const ProgressFn& progress) {
  validate(params);
  if (options.n < 1) {
    fail(ErrorCode::invalid_argument, "ensemble size must be >= 1");
  }
  EngineOptions engine;
  engine.record_edges = false;
  engine.width_limit = options.width_limit;
  std::int64_t max_time = options.max_time;
  if (options.velocity_window) {
    const auto [vb, ve] = *options.velocity_window;
    if (vb < 0 || ve - vb < 10) {
      fail(ErrorCode::invalid_argument,
           "velocity window must span at least 10 steps");
    }
    max_time = ve;
    engine.fit_begin = vb;
    engine.fit_end = ve;
  } else {
    const auto [b, e] = classification_window(max_time, options.rules);
    engine.fit_begin = b;
    engine.fit_end = e;
  }

  std::vector<EnsembleSample> samples(options.n);
  std::mutex progress_mutex;
  std::size_t done = 0;
  const std::size_t report_every = std::max<std::size_t>(1, options.n / 100);

  parallel_for(options.n, options.threads, [&](std::size_t i) {
    InitialCondition ic = options.ic;
    ic.seed = derive_seed(options.master_seed, i);
    const TrajectoryRecord rec = run_trajectory(params, ic, max_time, engine);
    const Classification cls = classify(rec, params, options.rules);
    EnsembleSample& s = samples[i];
    s.index = i;
    s.seed = ic.seed;
    s.lifetime = rec.lifetime;
    s.cause = rec.cause;
    s.label = cls.label;
    s.long_lived = cls.long_lived;
    if (options.velocity_window && rec.cause == Termination::max_time) {
      s.v_l = rec.window_fit.leading_slope();
      s.v_t = rec.window_fit.trailing_slope();
    }
    if (progress) {
      std::lock_guard lock(progress_mutex);
      ++done;
      if (done % report_every == 0 || done == options.n) progress(done, options.n);
    }
  });
  return samples;
}

// ---------------------------------------------------------------------------

std::string format_double(double v, int precision) {
  char buf[64];
  const auto res =
      precision > 0
          ? std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general,
                          precision)
          : std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_space_time(std::ostream& out, const ModelParams& params,
                      const InitialCondition& ic,
                      const SpaceTimeOptions& options) {
  EngineOptions engine;
  engine.record_edges = false;

  // First pass sizes the columns, second pass writes the rows.
  std::int64_t last_site = 0;
  const TrajectoryRecord rec = run_trajectory(
      params, ic, options.max_time, engine, [&](const Lattice& lat) {
        if (!lat.laminar()) last_site = std::max(last_site, lat.leading());
      });
  const std::int64_t columns =
      std::max<std::int64_t>(last_site + 1,
                             static_cast<std::int64_t>(initial_profile(ic, params).size()));

  out << "# ucml space-time alpha=" << format_double(params.alpha)
      << " h=" << format_double(params.h)
      << " delta=" << format_double(params.delta) << " ic=" << to_string(ic.kind)
      << " seed=" << ic.seed << " max_time=" << options.max_time
      << " lifetime=" << rec.lifetime << " cause=" << to_string(rec.cause)
      << " rows=" << rec.lifetime + 1 << " sites=" << columns << '\n';

  std::string line;
  run_trajectory(params, ic, options.max_time, engine, [&](const Lattice& lat) {
    line.clear();
    for (std::int64_t i = 0; i < columns; ++i) {
      if (i) line += ',';
      const double v = lat.at(i);
      line += v == 0.0 ? std::string("0") : format_double(v, options.precision);
    }
    line += '\n';
    out << line;
  });
}

}  // namespace ucml
