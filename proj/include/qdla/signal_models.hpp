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
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace qdla {

// S(t) = A sin(omega t + beta)
struct TargetSignal {
  double amplitude_A = 0.0;  // rad/s
  double omega = 1.0;        // rad/s
  double beta = 0.0;         // rad, in [-pi, pi)

  double half_period() const;
};

// validates and wraps beta into [-pi, pi)
TargetSignal make_signal(double amplitude_A, double omega, double beta);

double target_value(const TargetSignal& sig, double t);
// integral of S over [a, b]
double target_integral(const TargetSignal& sig, double a, double b);

struct NoNoise {};

// piecewise-constant N(0, sigma) cells of width sample_dt, starting at t = 0
struct WhiteGaussian {
  double sigma = 0.0;
  double sample_dt = 0.0;
};

// amplitude_Nn * sin(omega_ma t + beta_n); beta_n drawn on [0, 2pi) when unset
struct Mains {
  double amplitude_Nn = 0.0;
  double omega_ma = 1.0;
  std::optional<double> phase_beta_n;
};

using NoiseModel = std::variant<NoNoise, WhiteGaussian, Mains>;

void validate(const NoiseModel& model);
bool is_silent(const NoiseModel& model);

// Noise realization on a knot grid. Values are dimensionless (units of A):
// the probe sees M(t) = A [sin(omega t + beta) + noise(t)].
struct SignalTrace {
  std::vector<double> times;      // strictly increasing
  std::vector<double> values;     // noise at times[k], held on [t_k, t_k+1) for white noise
  std::vector<double> integrals;  // integral of noise over [0, times[k]]
  std::uint64_t seed = 0;

  struct Tone {
    double amplitude;
    double omega;
    double phase;
  };
  std::optional<Tone> tone;  // set for mains noise, evaluated analytically

  std::size_t knot(double t) const;            // index of the knot at t (must exist)
  std::size_t segment(double t) const;         // index k with times[k] <= t < times[k+1]
  double integral_between(double a, double b) const;
  double value_in(std::size_t seg, double t) const;
};

SignalTrace sample_noise(const NoiseModel& model, std::span<const double> times,
                         std::uint64_t seed);

// reproducible per-task seed from (master, point, realization)
std::uint64_t split_seed(std::uint64_t master, std::uint64_t point, std::uint64_t realization);

}  // namespace qdla
