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

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qdla/dd_sequences.hpp"
#include "qdla/ode.hpp"
#include "qdla/signal_models.hpp"
#include "qdla/spin_engine.hpp"

namespace qdla {

// levels |1>..|5> map to indices 0..4; |5> is the common excited state
using Mat5 = Eigen::Matrix<cplx, 5, 5>;
using Mat4 = Eigen::Matrix<cplx, 4, 4>;

struct CPTParams {
  double Gamma = 2 * M_PI * 5.746e6;  // rad/s
  double Omega = 0.035 * 2 * M_PI * 5.746e6;
  double delta1 = 2 * M_PI * 1e6;
  double delta2 = 2 * M_PI * 1e6;
  double Delta1 = 0.0;
  double Delta2 = 0.0;
  double gamma_g = -1.0014 * 2 * M_PI * 1.4e10;  // rad/(s T)
  double T_prep = 1e-4;
  double T_detect = 2e-6;
};

void validate(const CPTParams& p);

// rotating-frame Hamiltonian in rad/s; couplings to |5> only with light on
Mat5 build_hamiltonian(const CPTParams& p, bool light_on);

struct DensityCheck {
  double hermiticity = 0.0;  // max |rho - rho^dagger|
  double trace_error = 0.0;
  double min_eigenvalue = 0.0;
  bool ok() const { return hermiticity <= 1e-10 && trace_error <= 1e-8 && min_eigenvalue >= -1e-8; }
};

DensityCheck check_density(const Mat5& rho);

// extra ground-state Hamiltonian (rad/s) on |1>..|4>, time dependent
using GroundDrive = std::function<Mat4(double t)>;

struct LindbladOptions {
  OdeTolerance tol{1e-10, 1e-13};
  bool check = true;  // throw NumericalError if the result is not a valid state
};

// four decay channels |j><5| at rate Gamma/4 each
Mat5 lindblad_evolve(const Mat5& rho0, const CPTParams& p, double duration, bool light_on,
                     const GroundDrive& drive = {}, const LindbladOptions& opt = {});

Mat5 uniform_ground_mixture();
// (|D12><D12| + |D34><D34|)/2 with |D12> = (|1>-|2>)/sqrt2, |D34> = (|3>-|4>)/sqrt2
Mat5 dark_state_pair();
Mat5 bright_state_pair();

// Tr sqrt(sqrt(a) b sqrt(a))
double uhlmann_fidelity(const Mat5& a, const Mat5& b);

struct Preparation {
  Mat5 rho;
  double fidelity = 0.0;
};

Preparation prepare_dark_states(const CPTParams& p, const LindbladOptions& opt = {});

struct SensingOptions {
  PropagateOptions propagate{};
  // opposite gyromagnetic sign on the {|3>,|4>} pair
  bool strict_signs = false;
};

// |1>,|2> and |3>,|4> each act as (up, down) of a probe qubit
Mat5 apply_block_unitaries(const Mat5& rho, const Mat2& U12, const Mat2& U34);

// light off; the {|1>,|2>} pair follows the PDD train, {|3>,|4>} the CP train
Mat5 sensing_evolution(const Mat5& rho, const TargetSignal& sig, const SignalTrace* noise,
                       const PulseTrain& train_pdd, const PulseTrain& train_cp,
                       const SensingOptions& opt = {});

struct Detection {
  double rho55 = 0.0;
  double normalized = 0.0;  // rho55 / rho55(bright input)
};

// rho55 after the query pulse is linear in the input state; the map is
// computed once per parameter set
class DetectionMap {
 public:
  explicit DetectionMap(const CPTParams& p, const LindbladOptions& opt = {});
  double rho55(const Mat5& rho) const;
  Detection detect(const Mat5& rho) const;
  double normalization() const { return a_; }

 private:
  Mat5 coef_;
  double a_ = 0.0;
};

Detection detect_rho55(const Mat5& rho, const CPTParams& p, const LindbladOptions& opt = {});

// subtracts the series mean
std::vector<double> tilde_rho55(std::span<const double> series);

}  // namespace qdla
