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

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "ucml/error.hpp"
#include "ucml/simulation.hpp"

using namespace ucml;

namespace {

InitialCondition kick(std::uint64_t seed) {
  InitialCondition ic;
  ic.seed = seed;
  return ic;
}

}  // namespace

TEST_CASE("engine matches a full-lattice reference step for step") {
  const ModelParams cases[] = {{0.1, 2.1, 0.1}, {0.5, 2.2, 0.1}, {0.8, 2.1, 0.1},
                               {2.8, 2.1, 0.1}, {2.9, 3.0, 0.1}, {1.5, 2.6, 0.2}};
  for (const ModelParams& p : cases) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto init = initial_profile(kick(seed), p);
      Lattice engine(p, init, {8, 16});
      oracle::NaiveLattice ref(p, init, 700);
      for (int t = 1; t <= 600; ++t) {
        engine.advance();
        ref.step();
        REQUIRE(engine.laminar() == ref.laminar());
        if (engine.laminar()) break;
        REQUIRE(engine.leading() == ref.leading());
        REQUIRE(engine.trailing() == ref.trailing());
        for (std::int64_t i = ref.trailing(); i <= ref.leading(); ++i) {
          REQUIRE(engine.at(i) == ref.x[static_cast<std::size_t>(i)]);
        }
      }
    }
  }
}

TEST_CASE("dropping the zero prefix keeps the field intact") {
  // A structure far from site 0 makes the engine discard the zero prefix on
  // the first update; global site indices must not change.
  const ModelParams p{2.8, 2.1, 0.1};
  std::vector<double> init(5000, 0.0);
  const auto kick_sites = initial_profile({IcKind::multi_site, 0.0, 4, {}, 8}, p);
  init.insert(init.end(), kick_sites.begin(), kick_sites.end());
  Lattice engine(p, init, {64, 256});
  oracle::NaiveLattice ref(p, init, 6000);
  for (int t = 1; t <= 800; ++t) {
    engine.advance();
    ref.step();
    REQUIRE(engine.laminar() == ref.laminar());
    if (engine.laminar()) break;
    REQUIRE(engine.leading() == ref.leading());
    REQUIRE(engine.trailing() == ref.trailing());
  }
  // Without the trim the buffer would have had to grow past the front.
  CHECK(engine.leading() >= static_cast<std::int64_t>(engine.capacity()));
  for (std::int64_t i = 4990; i < 5900; ++i) {
    CHECK(engine.at(i) == ref.x[static_cast<std::size_t>(i)]);
  }
  CHECK(engine.at(-5) == 0.0);
}

TEST_CASE("recorded observables do not depend on the allocation") {
  const ModelParams p{2.8, 2.1, 0.1};
  const TrajectoryRecord a = run_trajectory(p, kick(9), 3000, {64, 256});
  const TrajectoryRecord b = run_trajectory(p, kick(9), 3000, {128, 100000});
  const TrajectoryRecord c = run_trajectory(p, kick(9), 3000, {1, 2});
  CHECK(a.leading == b.leading);
  CHECK(a.trailing == b.trailing);
  CHECK(a.active == b.active);
  CHECK(a.leading == c.leading);
  CHECK(a.active == c.active);
  CHECK(a.lifetime == b.lifetime);
}

TEST_CASE("trajectory record invariants") {
  for (const double alpha : {0.1, 0.5, 0.8, 2.8}) {
    const ModelParams p{alpha, 2.1, 0.1};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const TrajectoryRecord r = run_trajectory(p, kick(seed), 2000);
      CHECK(r.lifetime <= 2000);
      CHECK(r.leading.size() == r.trailing.size());
      CHECK(r.seed == seed);
      if (r.cause == Termination::decayed) {
        CHECK(static_cast<std::int64_t>(r.leading.size()) == r.lifetime);
      } else {
        CHECK(static_cast<std::int64_t>(r.leading.size()) == r.lifetime + 1);
      }
      for (std::size_t t = 0; t < r.leading.size(); ++t) {
        CHECK(r.leading[t] >= r.trailing[t]);
        CHECK(r.active[t] >= 1);
        CHECK(r.active[t] <= r.leading[t] - r.trailing[t] + 1);
        if (t > 0) CHECK(r.leading[t] <= r.leading[t - 1] + 1);
      }
    }
  }
}

TEST_CASE("laminar state is absorbing") {
  Lattice lat({0.5, 2.1, 0.1}, std::vector<double>{0.05});
  CHECK_FALSE(lat.laminar());
  lat.advance();
  CHECK(lat.laminar());
  Lattice dying({0.1, 2.1, 0.1}, std::vector<double>{1.5});
  int t = 0;
  while (!dying.laminar() && t < 10000) {
    dying.advance();
    ++t;
  }
  REQUIRE(dying.laminar());
  for (int k = 0; k < 50; ++k) {
    dying.advance();
    CHECK(dying.laminar());
    CHECK(dying.active_sites() == 0);
  }
  const TrajectoryRecord r = run_trajectory({0.5, 2.1, 0.1}, {IcKind::fixed_kick, 0.0, 1, {}}, 10);
  CHECK(r.lifetime == 0);
  CHECK(r.leading.empty());
}

TEST_CASE("information only travels downstream") {
  // Perturbing a site right of the structure never changes anything to its
  // left; changes at site j reach site i only after i - j steps.
  const ModelParams p{2.8, 2.1, 0.1};
  std::vector<double> base = initial_profile({IcKind::multi_site, 0.0, 5, {}, 42}, p);
  base.resize(40, 0.0);
  std::vector<double> bumped = base;
  bumped[20] = 1.7;
  oracle::NaiveLattice a(p, base, 200);
  oracle::NaiveLattice b(p, bumped, 200);
  Lattice ea(p, base);
  Lattice eb(p, bumped);
  for (int t = 1; t <= 100; ++t) {
    a.step();
    b.step();
    ea.advance();
    eb.advance();
    for (int i = 0; i < 20; ++i) {
      REQUIRE(a.x[i] == b.x[i]);
      REQUIRE(ea.at(i) == eb.at(i));
    }
    for (int i = 20 + t + 1; i < 200; ++i) {
      REQUIRE(b.x[i] == a.x[i]);
    }
  }
}

TEST_CASE("edge velocities are least-squares slopes") {
  TrajectoryRecord r;
  r.cause = Termination::max_time;
  for (int t = 0; t <= 100; ++t) {
    r.leading.push_back(10 + t / 4);
    r.trailing.push_back(t / 10);
    r.active.push_back(1);
  }
  r.lifetime = 100;
  std::vector<double> ts, ls, tr;
  for (int t = 0; t < 100; ++t) {
    ts.push_back(t);
    ls.push_back(r.leading[t]);
    tr.push_back(r.trailing[t]);
  }
  const EdgeVelocities v = measure_edge_velocities(r, 0, 100);
  CHECK(v.leading == doctest::Approx(oracle::ols_slope(ts, ls)).epsilon(1e-12));
  CHECK(v.trailing == doctest::Approx(oracle::ols_slope(ts, tr)).epsilon(1e-12));
  CHECK(v.leading == doctest::Approx(0.25).epsilon(0.01));
  // Exactly one site per four steps over whole periods.
  CHECK(measure_edge_velocities(r, 0, 80).leading == doctest::Approx(0.25).epsilon(0.02));
  CHECK_THROWS_AS(measure_edge_velocities(r, 0, 9), Error);
  CHECK_THROWS_AS(measure_edge_velocities(r, 50, 200), Error);
}

TEST_CASE("streaming edge fit equals the batch fit") {
  const TrajectoryRecord r = run_trajectory({2.8, 2.1, 0.1}, kick(5), 1500);
  REQUIRE(r.cause == Termination::max_time);
  EdgeFit fit;
  for (std::int64_t t = 500; t <= 1500; ++t) {
    fit.add(static_cast<double>(t), static_cast<double>(r.leading[t]),
            static_cast<double>(r.trailing[t]));
  }
  const EdgeVelocities v = measure_edge_velocities(r, 500, 1501);
  CHECK(fit.count() == 1001);
  CHECK(fit.leading_slope() == doctest::Approx(v.leading).epsilon(1e-10));
  CHECK(fit.trailing_slope() == doctest::Approx(v.trailing).epsilon(1e-10));

  EngineOptions o;
  o.record_edges = false;
  o.fit_begin = 500;
  o.fit_end = 1500;
  const TrajectoryRecord s = run_trajectory({2.8, 2.1, 0.1}, kick(5), 1500, o);
  CHECK(s.leading.empty());
  CHECK(s.window_fit.leading_slope() == fit.leading_slope());
  CHECK(s.window_fit.trailing_slope() == fit.trailing_slope());
}

TEST_CASE("classification of decays, puffs and slugs") {
  const ModelParams p{0.1, 2.1, 0.1};
  TrajectoryRecord quick;
  quick.lifetime = 20;
  quick.cause = Termination::decayed;
  CHECK(classify(quick, p).label == Label::decay);
  quick.lifetime = 300;
  CHECK(classify(quick, p).label == Label::puff);
  CHECK_FALSE(classify(quick, p).long_lived);
  quick.lifetime = 30000;
  CHECK(classify(quick, p).long_lived);

  const ModelParams slug_p{2.8, 2.1, 0.1};
  const TrajectoryRecord slug = run_trajectory(slug_p, kick(1), 3000);
  const Classification cs = classify(slug, slug_p);
  CHECK(cs.label == Label::slug);
  CHECK(cs.width_slope > 0.1);

  // Fixed-width structure: same edge speed on both sides.
  TrajectoryRecord flat;
  flat.cause = Termination::max_time;
  flat.lifetime = 2000;
  for (int t = 0; t <= 2000; ++t) {
    flat.leading.push_back(20 + t / 3);
    flat.trailing.push_back(t / 3);
    flat.active.push_back(10);
  }
  CHECK(classify(flat, p).label == Label::puff);

  TrajectoryRecord wide;
  wide.cause = Termination::width_limit;
  wide.lifetime = 5;
  CHECK(classify(wide, p).label == Label::slug);

  // h <= 2: no transient time scale, decays are always immediate decays.
  TrajectoryRecord marginal;
  marginal.lifetime = 100000;
  CHECK(classify(marginal, {0.5, 2.0, 0.1}).label == Label::decay);
}

TEST_CASE("ensembles are reproducible and independent of thread count") {
  const ModelParams p{0.5, 2.2, 0.1};
  EnsembleOptions o;
  o.n = 64;
  o.master_seed = 2024;
  o.max_time = 5000;
  o.threads = 1;
  const auto one = run_ensemble(p, o);
  o.threads = 4;
  const auto four = run_ensemble(p, o);
  REQUIRE(one.size() == four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].index == i);
    CHECK(one[i].seed == derive_seed(2024, i));
    CHECK(one[i].seed == four[i].seed);
    CHECK(one[i].lifetime == four[i].lifetime);
    CHECK(one[i].label == four[i].label);
  }
  // Replay of a single sample from its stored seed.
  InitialCondition ic;
  ic.seed = one[17].seed;
  CHECK(run_trajectory(p, ic, 5000).lifetime == one[17].lifetime);

  o.n = 1;
  const auto single = run_ensemble(p, o);
  ic.seed = derive_seed(2024, 0);
  const TrajectoryRecord r = run_trajectory(p, ic, 5000);
  CHECK(single[0].lifetime == r.lifetime);
  CHECK(single[0].cause == r.cause);
  o.n = 0;
  CHECK_THROWS_AS(run_ensemble(p, o), Error);
}

TEST_CASE("velocity windows in ensembles") {
  EnsembleOptions o;
  o.n = 20;
  o.master_seed = 3;
  o.velocity_window = std::make_pair(std::int64_t{200}, std::int64_t{1200});
  const auto s = run_ensemble({2.9, 2.5, 0.1}, o);
  int measured = 0;
  for (const EnsembleSample& x : s) {
    if (!x.has_velocities()) continue;
    ++measured;
    CHECK(x.v_l == doctest::Approx(1.0).epsilon(0.01));
    CHECK(x.v_t > std::log(1.25));
  }
  CHECK(measured >= 10);
  o.velocity_window = std::make_pair(std::int64_t{10}, std::int64_t{15});
  CHECK_THROWS_AS(run_ensemble({2.9, 2.5, 0.1}, o), Error);
}

TEST_CASE("initial conditions") {
  const ModelParams p{0.5, 2.1, 0.1};
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double x = spreading_draw(rng, 0.1);
    REQUIRE(x > 1.1);
    REQUIRE(x < 2.1);
  }
  CHECK(initial_profile(kick(5), p) == initial_profile(kick(5), p));
  CHECK(initial_profile(kick(5), p) != initial_profile(kick(6), p));
  CHECK(initial_profile({IcKind::multi_site, 0.0, 7, {}, 1}, p).size() == 7);
  CHECK(initial_profile({IcKind::fixed_kick, 1.3, 1, {}, 0}, p) == std::vector<double>{1.3});
  CHECK(initial_profile({IcKind::explicit_profile, 0.0, 1, {0.0, 1.2}, 0}, p).size() == 2);
  CHECK_THROWS_AS(initial_profile({IcKind::explicit_profile, 0.0, 1, {-1.0}, 0}, p), Error);
  CHECK_THROWS_AS(initial_profile({IcKind::multi_site, 0.0, 0, {}, 0}, p), Error);
  for (const IcKind k : {IcKind::single_site, IcKind::fixed_kick, IcKind::multi_site,
                         IcKind::explicit_profile}) {
    CHECK(ic_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(ic_kind_from_string("gaussian"), Error);
}

TEST_CASE("fixed kick jitter") {
  const ModelParams p{0.5, 2.1, 0.1};
  std::set<double> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto v = initial_profile({IcKind::fixed_kick, 1.3, 1, {}, seed, 1e-3}, p);
    REQUIRE(v.size() == 1);
    CHECK(std::abs(v[0] - 1.3) <= 1e-3);
    seen.insert(v[0]);
    CHECK(v == initial_profile({IcKind::fixed_kick, 1.3, 1, {}, seed, 1e-3}, p));
  }
  CHECK(seen.size() == 200);
  CHECK_THROWS_AS(initial_profile({IcKind::fixed_kick, 1.3, 1, {}, 0, -1.0}, p), Error);
}

TEST_CASE("space-time export") {
  const ModelParams p{2.8, 2.1, 0.1};
  std::ostringstream out;
  write_space_time(out, p, kick(4), {200, 0});
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("# ucml space-time alpha=2.8 h=2.1 delta=0.1 ic=single seed=4", 0) == 0);
  const TrajectoryRecord r = run_trajectory(p, kick(4), 200);
  std::int64_t max_lead = 0;
  for (const auto l : r.leading) max_lead = std::max(max_lead, l);
  std::string line;
  int rows = 0;
  Lattice lat(p, initial_profile(kick(4), p));
  while (std::getline(in, line)) {
    std::vector<double> values;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) values.push_back(std::stod(cell));
    REQUIRE(static_cast<std::int64_t>(values.size()) == max_lead + 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
      REQUIRE(values[i] == lat.at(static_cast<std::int64_t>(i)));
    }
    lat.advance();
    ++rows;
  }
  CHECK(rows == 201);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0, 3) == "0.333");
}
