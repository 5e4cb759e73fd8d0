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

#include "qdla/dd_sequences.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "qdla/errors.hpp"

namespace qdla {

const char* to_string(SeqKind kind) { return kind == SeqKind::PDD ? "PDD" : "CP"; }

double PulseTrain::center(int j) const {
  return kind == SeqKind::PDD ? j * tau_m : (j - 0.5) * tau_m;
}

void validate(const PulseTrain& train) {
  if (!(train.tau_m > 0.0) || !std::isfinite(train.tau_m)) throw InputError("tau_m must be > 0");
  if (train.n < 2 || train.n % 2 != 0) throw InputError("n must be a positive even integer");
  if (!(train.pulse_width >= 0.0) || train.pulse_width > train.tau_m)
    throw InputError("pulse width must satisfy 0 <= T_Omega <= tau_m");
}

std::vector<double> pulse_centers(const PulseTrain& train) {
  validate(train);
  std::vector<double> c;
  c.reserve(train.pulse_count());
  for (int j = 1; j <= train.pulse_count(); ++j) c.push_back(train.center(j));
  return c;
}

int modulation_h(const PulseTrain& train, double t) {
  validate(train);
  if (!train.is_delta()) throw InputError("modulation_h is defined for delta pulses");
  // count centres <= t
  int count = 0;
  if (train.kind == SeqKind::PDD) {
    count = static_cast<int>(std::floor(t / train.tau_m));
  } else {
    count = static_cast<int>(std::floor(t / train.tau_m + 0.5));
  }
  if (count < 0) count = 0;
  if (count > train.pulse_count()) count = train.pulse_count();
  return count % 2 == 0 ? 1 : -1;
}

double alpha(const PulseTrain& train, double t) {
  validate(train);
  const double pi = std::numbers::pi;
  const double w = train.pulse_width;
  double a = 0.0;
  for (int j = 1; j <= train.pulse_count(); ++j) {
    const double c = train.center(j);
    if (w == 0.0) {
      if (t >= c) a += pi;
    } else if (t >= c + 0.5 * w) {
      a += pi;
    } else if (t > c - 0.5 * w) {
      a += pi * (t - (c - 0.5 * w)) / w;
    }
  }
  return a;
}

double filter_function(const PulseTrain& train, double omega) {
  validate(train);
  if (!train.is_delta()) throw InputError("filter_function is defined for delta pulses");
  using cplx = std::complex<double>;
  const cplx I(0.0, 1.0);
  auto seg = [&](double a, double b) -> cplx {
    if (omega == 0.0) return cplx(b - a, 0.0);
    return (std::exp(I * (omega * b)) - std::exp(I * (omega * a))) / (I * omega);
  };
  cplx y = 0.0;
  double start = 0.0;
  double h = 1.0;
  for (int j = 1; j <= train.pulse_count(); ++j) {
    const double c = train.center(j);
    y += h * seg(start, c);
    start = c;
    h = -h;
  }
  y += h * seg(start, train.t_n());
  return std::norm(y);
}

}  // namespace qdla
