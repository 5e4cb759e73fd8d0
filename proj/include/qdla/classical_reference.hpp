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

#include <cstdint>

#include "qdla/signal_models.hpp"

namespace qdla {

struct IQPair {
  double I = 0.0;
  double Q = 0.0;
  double T = 0.0;
  double omega_m = 0.0;
  bool short_window = false;  // T shorter than 10 signal periods
};

// I = int_0^T V sin(omega_m t) dt, Q = int_0^T V cos(omega_m t) dt with
// V = A [sin(omega t + beta) + noise(t)]. The noise trace is held constant
// between its knots (tone traces are integrated analytically).
IQPair mix_and_integrate(const TargetSignal& sig, const SignalTrace* noise, double omega_m, double T);

// samples the noise on its own cell grid over [0, T] first
IQPair mix_and_integrate(const TargetSignal& sig, const NoiseModel& noise, std::uint64_t seed,
                         double omega_m, double T);

struct ClassicalEstimate {
  double A_hat = 0.0;
  double beta_hat = 0.0;  // atan2(Q, I), full quadrant
};

ClassicalEstimate extract_classical(const IQPair& iq);

}  // namespace qdla
