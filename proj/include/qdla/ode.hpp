// Copyright 2026 The qdla Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "qdla/errors.hpp"

namespace qdla {

struct OdeTolerance {
  double rtol = 1e-10;
  double atol = 1e-12;
};

// Adaptive Dormand-Prince integration of x over [t0, t1]. Throws
// IntegrationError when the step size collapses.
template <class State, class System>
void integrate_adaptive_dp(System&& sys, State& x, double t0, double t1, const OdeTolerance& tol,
                           double dt_hint = 0.0) {
  namespace ode = boost::numeric::odeint;
  if (t1 <= t0) return;
  auto stepper = ode::make_controlled(tol.atol, tol.rtol, ode::runge_kutta_dopri5<State>());
  const double span = t1 - t0;
  double dt = dt_hint > 0.0 ? std::min(dt_hint, span) : span / 16.0;
  double t = t0;
  int fails = 0;
  while (t < t1) {
    if (t + dt > t1) dt = t1 - t;
    const double before = t;
    const auto res = stepper.try_step(sys, x, t, dt);
    if (res == ode::success) {
      fails = 0;
      if (t1 - t < 1e-14 * span) break;
    } else if (++fails > 500 || dt < 1e-16 * span) {
      throw IntegrationError("adaptive step size underflow at t = " + std::to_string(before));
    }
  }
}

}  // namespace qdla
