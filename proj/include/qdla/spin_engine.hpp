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

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "qdla/dd_sequences.hpp"
#include "qdla/ode.hpp"
#include "qdla/signal_models.hpp"

namespace qdla {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;

// basis order (up, down)
struct QubitState {
  cplx up{M_SQRT1_2, 0.0};
  cplx down{M_SQRT1_2, 0.0};

  double norm2() const { return std::norm(up) + std::norm(down); }
};

struct PhasePair {
  double phi_z = 0.0;
  double phi_y = 0.0;

  double magnitude() const;
};

struct DecayChannel {
  double gamma = 0.0;
};

// exact integral of S(t) h(t) over [0, t_n]
double phase_ideal_exact(const PulseTrain& train, const TargetSignal& sig);

// sin(nx)/sin(x)-type closed forms; Taylor branch next to the lock-in point
double phase_closed_form(const PulseTrain& train, const TargetSignal& sig);

// first-order (phi_z, phi_y) for square pulses
PhasePair phase_finite_pulse(const PulseTrain& train, const TargetSignal& sig);

struct PropagateOptions {
  OdeTolerance tol{};
  // integrate the diagonal stretches between pulse windows in closed form
  bool exact_free_segments = true;
  // +1 or -1, multiplies the whole coupling M(t)
  double coupling_sign = 1.0;
};

// interaction-picture propagator over [0, t_n]; noise may be null
Mat2 propagator_numeric(const PulseTrain& train, const TargetSignal& sig, const SignalTrace* noise,
                        const PropagateOptions& opt = {});

QubitState propagate_numeric(const PulseTrain& train, const TargetSignal& sig,
                             const SignalTrace* noise, const QubitState& state0,
                             const PropagateOptions& opt = {});

// Propagators at t_n for every n in ns (ascending, even) of one sequence kind,
// sharing a single pass. The noise trace must contain all knots from
// required_knots().
std::vector<Mat2> propagator_series(SeqKind kind, double tau_m, double pulse_width,
                                    const std::vector<int>& ns, const TargetSignal& sig,
                                    const SignalTrace* noise, const PropagateOptions& opt = {});

// Accumulated phases at t_n for delta pulses, with noise; exact.
std::vector<double> phase_series_delta(SeqKind kind, double tau_m, const std::vector<int>& ns,
                                       const TargetSignal& sig, const SignalTrace* noise,
                                       double coupling_sign = 1.0);

// Knot times needed to evaluate both sequence kinds up to n_max with noise.
std::vector<double> required_knots(double tau_m, double pulse_width, int n_max,
                                   const NoiseModel& noise);

struct DysonResult {
  Mat2 U;
  bool in_domain = true;  // sqrt(phi_z^2 + phi_y^2) <= 1
};

// exp(-i [phi_z sz + phi_y sy] / 2)
DysonResult dyson_second_order(const PhasePair& phi);

// rotation generator (phi_z, phi_y) of a unitary with no sx component
PhasePair phases_from_unitary(const Mat2& U);

double readout_p_up(double phi_n);
double readout_p_up(const PhasePair& phi);
double readout_p_z(double phi_n);

// readout after exp(-i pi sy / 4), for a state prepared in (|up>+|down>)/sqrt2
double readout_p_up(const QubitState& s);
double readout_p_z(const QubitState& s);

QubitState apply_unitary(const Mat2& U, const QubitState& s);
double state_fidelity(const QubitState& a, const QubitState& b);

// 2x2 density matrix at time t (0 <= t <= t_n) starting from (|up>+|down>)/sqrt2,
// delta pulses, ground-state decay L = sigma_minus in the lab frame.
Mat2 evolve_with_decay(const PulseTrain& train, const TargetSignal& sig, const DecayChannel& decay,
                       double t, const OdeTolerance& tol = {});

}  // namespace qdla
