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

#include "ucml/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "ucml/error.hpp"

namespace ucml {

void validate(const ModelParams& params) {
  std::ostringstream msg;
  if (!std::isfinite(params.alpha) || params.alpha < 0.0) {
    msg << "alpha must be finite and >= 0 (got " << params.alpha << ")";
  } else if (!std::isfinite(params.h) || params.h <= 1.0) {
    msg << "h must be finite and > 1 (got " << params.h << ")";
  } else if (!std::isfinite(params.delta) || params.delta <= 0.0 ||
             params.delta >= 1.0) {
    msg << "delta must lie in (0, 1) (got " << params.delta << ")";
  } else {
    return;
  }
  fail(ErrorCode::invalid_argument, msg.str());
}

double onsite_map(double x, const ModelParams& params) {
  return onsite(x, params.h, params.delta);
}

double coupling_map(double x, const ModelParams& params) {
  return coupling(x, params.delta);
}

LatticeState step(const LatticeState& state, const ModelParams& params) {
  LatticeState next;
  next.sites.resize(state.sites.size());
  next.time = state.time + 1;
  double left = 0.0;
  for (std::size_t i = 0; i < state.sites.size(); ++i) {
    next.sites[i] = update_site(left, state.sites[i], params.alpha, params.h,
                                params.delta);
    left = state.sites[i];
  }
  return next;
}

FixedPoints onsite_fixed_points(const ModelParams& params) {
  const double h = params.h;
  const double d = params.delta;
  if (!(h > 1.0)) {
    fail(ErrorCode::domain, "fixed points require h > 1");
  }
  if (!(d >= 0.0)) {
    fail(ErrorCode::domain, "fixed points require delta >= 0");
  }
  FixedPoints fp;
  fp.x0 = {0.0, true};
  fp.x1 = {h * d / (h - 1.0), false};
  fp.x2 = {h * (2.0 + d) / (1.0 + h), false};
  return fp;
}

double single_site_lifetime_theory(const ModelParams& params) {
  if (!(params.h > kCriticalSlope)) {
    fail(ErrorCode::domain, "single-site lifetime requires h > 2");
  }
  return 1.0 / std::log(params.h / kCriticalSlope);
}

}  // namespace ucml
