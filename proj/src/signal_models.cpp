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

#include "qdla/signal_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "qdla/errors.hpp"

namespace qdla {

namespace {
constexpr double kPi = std::numbers::pi;

double wrap_phase(double b) {
  double w = std::fmod(b + kPi, 2.0 * kPi);
  if (w < 0) w += 2.0 * kPi;
  return w - kPi;
}
}  // namespace

double TargetSignal::half_period() const { return kPi / omega; }

TargetSignal make_signal(double amplitude_A, double omega, double beta) {
  if (!(amplitude_A >= 0.0) || !std::isfinite(amplitude_A))
    throw InputError("signal amplitude must be finite and >= 0");
  if (!(omega > 0.0) || !std::isfinite(omega)) throw InputError("signal omega must be > 0");
  if (!std::isfinite(beta)) throw InputError("signal beta must be finite");
  return TargetSignal{amplitude_A, omega, wrap_phase(beta)};
}

double target_value(const TargetSignal& sig, double t) {
  return sig.amplitude_A * std::sin(sig.omega * t + sig.beta);
}

double target_integral(const TargetSignal& sig, double a, double b) {
  const double w = sig.omega;
  return sig.amplitude_A / w * (std::cos(w * a + sig.beta) - std::cos(w * b + sig.beta));
}

void validate(const NoiseModel& model) {
  if (const auto* wg = std::get_if<WhiteGaussian>(&model)) {
    if (!(wg->sigma >= 0.0)) throw InputError("noise.sigma must be >= 0");
    if (!(wg->sample_dt > 0.0)) throw InputError("noise.sample_dt must be > 0");
  } else if (const auto* m = std::get_if<Mains>(&model)) {
    if (!(m->omega_ma > 0.0)) throw InputError("noise.omega_ma must be > 0");
    if (!std::isfinite(m->amplitude_Nn)) throw InputError("noise.amplitude must be finite");
  }
}

bool is_silent(const NoiseModel& model) {
  if (std::holds_alternative<NoNoise>(model)) return true;
  if (const auto* wg = std::get_if<WhiteGaussian>(&model)) return wg->sigma == 0.0;
  return std::get<Mains>(model).amplitude_Nn == 0.0;
}

std::size_t SignalTrace::knot(double t) const {
  if (times.empty()) throw InputError("empty noise trace");
  auto it = std::lower_bound(times.begin(), times.end(), t);
  std::size_t k = it - times.begin();
  if (k == times.size() || (k > 0 && t - times[k - 1] < times[k] - t)) --k;
  double gap = 0.0;
  if (k + 1 < times.size()) gap = times[k + 1] - times[k];
  if (k > 0) gap = gap > 0.0 ? std::min(gap, times[k] - times[k - 1]) : times[k] - times[k - 1];
  const double d = std::abs(times[k] - t);
  if (d <= 1e-9 * gap || d <= 1e-14 * std::abs(t)) return k;
  throw InputError("noise trace has no knot at requested time");
}

std::size_t SignalTrace::segment(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0;
  return std::min<std::size_t>(it - times.begin() - 1, times.size() - 1);
}

double SignalTrace::integral_between(double a, double b) const {
  return integrals[knot(b)] - integrals[knot(a)];
}

double SignalTrace::value_in(std::size_t seg, double t) const {
  if (tone) return tone->amplitude * std::sin(tone->omega * t + tone->phase);
  return values[seg];
}

SignalTrace sample_noise(const NoiseModel& model, std::span<const double> times,
                         std::uint64_t seed) {
  validate(model);
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw InputError("noise sample times must be strictly increasing");

  SignalTrace tr;
  tr.times.assign(times.begin(), times.end());
  tr.values.assign(times.size(), 0.0);
  tr.integrals.assign(times.size(), 0.0);
  tr.seed = seed;

  if (std::holds_alternative<NoNoise>(model)) return tr;

  std::mt19937_64 rng(seed);
  if (const auto* m = std::get_if<Mains>(&model)) {
    double phase = 0.0;
    if (m->phase_beta_n) {
      phase = *m->phase_beta_n;
    } else {
      std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
      phase = u(rng);
    }
    tr.tone = SignalTrace::Tone{m->amplitude_Nn, m->omega_ma, phase};
    const double a = m->amplitude_Nn, w = m->omega_ma;
    for (std::size_t i = 0; i < times.size(); ++i) {
      tr.values[i] = a * std::sin(w * times[i] + phase);
      tr.integrals[i] = a / w * (std::cos(phase) - std::cos(w * times[i] + phase));
    }
    return tr;
  }

  // White noise: cells c = [c dt, (c+1) dt). Whole skipped cells enter through
  // one Gaussian of variance equal to their count, so cost is per knot.
  const auto& wg = std::get<WhiteGaussian>(model);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double dt = wg.sample_dt;
  long long cur = -1;   // current cell
  double sum = 0.0;     // sum of cell values before cur
  double val = 0.0;     // value of cell cur
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double q = times[i] / dt;
    long long c = static_cast<long long>(std::floor(q));
    double frac = q - static_cast<double>(c);
    if (frac > 1.0 - 1e-9) {
      ++c;
      frac = 0.0;
    }
    if (c < 0) throw InputError("noise sample times must be >= 0");
    if (c != cur) {
      long long gap = c - cur - 1;
      if (cur >= 0) sum += val;
      else gap = c;
      if (gap > 0) sum += std::sqrt(static_cast<double>(gap)) * gauss(rng);
      val = gauss(rng);
      cur = c;
    }
    tr.values[i] = wg.sigma * val;
    tr.integrals[i] = wg.sigma * dt * (sum + frac * val);
  }
  return tr;
}

std::uint64_t split_seed(std::uint64_t master, std::uint64_t point, std::uint64_t realization) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(point), static_cast<std::uint32_t>(point >> 32),
                    static_cast<std::uint32_t>(realization),
                    static_cast<std::uint32_t>(realization >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace qdla
