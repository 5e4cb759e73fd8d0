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

#include "qdla/classical_reference.hpp"

#include <cmath>
#include <numbers>
#include <variant>
#include <vector>

#include "qdla/errors.hpp"

namespace qdla {

namespace {

// int_a^b sin(w t + p) dt
double int_sin(double w, double p, double a, double b) {
  if (w == 0.0) return std::sin(p) * (b - a);
  return (std::cos(w * a + p) - std::cos(w * b + p)) / w;
}

// int_a^b cos(w t + p) dt
double int_cos(double w, double p, double a, double b) {
  if (w == 0.0) return std::cos(p) * (b - a);
  return (std::sin(w * b + p) - std::sin(w * a + p)) / w;
}

// int_a^b sin(w t + p) sin(wm t) dt and int_a^b sin(w t + p) cos(wm t) dt
void mixed(double w, double p, double wm, double a, double b, double& s, double& c) {
  s = 0.5 * (int_cos(w - wm, p, a, b) - int_cos(w + wm, p, a, b));
  c = 0.5 * (int_sin(w - wm, p, a, b) + int_sin(w + wm, p, a, b));
}

}  // namespace

IQPair mix_and_integrate(const TargetSignal& sig, const SignalTrace* noise, double omega_m,
                         double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InputError("integration time must be > 0");
  if (!(omega_m > 0.0)) throw InputError("reference frequency must be > 0");
  IQPair iq;
  iq.T = T;
  iq.omega_m = omega_m;
  iq.short_window = T < 10.0 * 2.0 * std::numbers::pi / sig.omega;

  double si = 0.0, sq = 0.0;
  mixed(sig.omega, sig.beta, omega_m, 0.0, T, si, sq);

  double ni = 0.0, nq = 0.0;
  if (noise && !noise->times.empty()) {
    if (noise->tone) {
      const auto& tn = *noise->tone;
      double a = 0.0, b = 0.0;
      mixed(tn.omega, tn.phase, omega_m, 0.0, T, a, b);
      ni = tn.amplitude * a;
      nq = tn.amplitude * b;
    } else {
      const auto& t = noise->times;
      if (t.front() > 0.0 || t.back() < T)
        throw InputError("noise trace must cover the integration window");
      for (std::size_t k = 0; k + 1 < t.size() && t[k] < T; ++k) {
        const double a = t[k], b = std::min(t[k + 1], T);
        ni += noise->values[k] * int_sin(omega_m, 0.0, a, b);
        nq += noise->values[k] * int_cos(omega_m, 0.0, a, b);
      }
    }
  }
  iq.I = sig.amplitude_A * (si + ni);
  iq.Q = sig.amplitude_A * (sq + nq);
  return iq;
}

IQPair mix_and_integrate(const TargetSignal& sig, const NoiseModel& noise, std::uint64_t seed,
                         double omega_m, double T) {
  validate(noise);
  if (!(T > 0.0)) throw InputError("integration time must be > 0");
  std::vector<double> knots{0.0};
  if (const auto* w = std::get_if<WhiteGaussian>(&noise)) {
    const auto cells = static_cast<std::size_t>(std::ceil(T / w->sample_dt));
    knots.reserve(cells + 1);
    for (std::size_t k = 1; k < cells; ++k) knots.push_back(k * w->sample_dt);
  }
  knots.push_back(T);
  const auto tr = sample_noise(noise, knots, seed);
  return mix_and_integrate(sig, &tr, omega_m, T);
}

ClassicalEstimate extract_classical(const IQPair& iq) {
  if (!(iq.T > 0.0)) throw InputError("integration time must be > 0");
  return {2.0 * std::hypot(iq.I, iq.Q) / iq.T, std::atan2(iq.Q, iq.I)};
}

}  // namespace qdla
