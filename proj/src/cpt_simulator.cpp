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

#include "qdla/cpt_simulator.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qdla/errors.hpp"

namespace qdla {

namespace {

using State25 = std::array<cplx, 25>;
constexpr cplx kI{0.0, 1.0};

Eigen::Map<Mat5> as_mat(State25& s) { return Eigen::Map<Mat5>(s.data()); }
Eigen::Map<const Mat5> as_mat(const State25& s) { return Eigen::Map<const Mat5>(s.data()); }

Mat5 sqrt_psd(const Mat5& m) {
  Eigen::SelfAdjointEigenSolver<Mat5> es(0.5 * (m + m.adjoint()));
  Eigen::Matrix<double, 5, 1> ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

Mat5 pair_state(double sign) {
  Mat5 r = Mat5::Zero();
  for (int b : {0, 2}) {
    r(b, b) = r(b + 1, b + 1) = 0.25;
    r(b, b + 1) = r(b + 1, b) = 0.25 * sign;
  }
  return r;
}

}  // namespace

void validate(const CPTParams& p) {
  if (!(p.Gamma > 0.0)) throw InputError("Gamma must be > 0");
  if (!(p.T_prep > 0.0)) throw InputError("T_prep must be > 0");
  if (!(p.T_detect > 0.0)) throw InputError("T_detect must be > 0");
  for (double v : {p.Omega, p.delta1, p.delta2, p.Delta1, p.Delta2, p.gamma_g})
    if (!std::isfinite(v)) throw InputError("CPT parameters must be finite");
}

Mat5 build_hamiltonian(const CPTParams& p, bool light_on) {
  Mat5 H = Mat5::Zero();
  H(0, 0) = -p.delta1 - 0.5 * p.Delta1;
  H(1, 1) = -p.delta1 + 0.5 * p.Delta1;
  H(2, 2) = p.delta2 - 0.5 * p.Delta2;
  H(3, 3) = p.delta2 + 0.5 * p.Delta2;
  if (light_on) {
    for (int j = 0; j < 4; ++j) {
      H(j, 4) = std::conj(cplx(p.Omega));
      H(4, j) = p.Omega;
    }
  }
  return H;
}

DensityCheck check_density(const Mat5& rho) {
  DensityCheck c;
  c.hermiticity = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  c.trace_error = std::abs(rho.trace() - 1.0);
  Eigen::SelfAdjointEigenSolver<Mat5> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  c.min_eigenvalue = es.eigenvalues().minCoeff();
  return c;
}

Mat5 lindblad_evolve(const Mat5& rho0, const CPTParams& p, double duration, bool light_on,
                     const GroundDrive& drive, const LindbladOptions& opt) {
  validate(p);
  if (!(duration >= 0.0)) throw InputError("duration must be >= 0");
  const Mat5 H0 = build_hamiltonian(p, light_on);
  const double g4 = 0.25 * p.Gamma, g2 = 0.5 * p.Gamma;

  auto rhs = [&](const State25& x, State25& dx, double t) {
    const auto r = as_mat(x);
    auto d = as_mat(dx);
    Mat5 H = H0;
    if (drive) H.topLeftCorner<4, 4>() += drive(t);
    d = -kI * (H * r - r * H);
    // sum_j L_j rho L_j^dag with L_j = |j><5|
    for (int j = 0; j < 4; ++j) d(j, j) += g4 * r(4, 4);
    // -(1/2) {L^dag L, rho} summed: L_j^dag L_j = |5><5|
    d.row(4) -= g2 * r.row(4);
    d.col(4) -= g2 * r.col(4);
  };

  State25 x;
  as_mat(x) = rho0;
  // explicit stepping resolves the fastest rates; hint one tenth of that scale
  const double rate = std::max({p.Gamma, std::abs(p.Omega), std::abs(p.delta1), std::abs(p.delta2), 1.0});
  integrate_adaptive_dp(rhs, x, 0.0, duration, opt.tol, std::min(duration, 0.1 / rate));
  Mat5 out = as_mat(x);
  if (opt.check) {
    const auto c = check_density(out);
    if (!c.ok() && check_density(rho0).ok()) {
      std::ostringstream msg;
      msg << "Lindblad evolution left the state space (hermiticity " << c.hermiticity
          << ", trace error " << c.trace_error << ", min eigenvalue " << c.min_eigenvalue << ")";
      throw NumericalError(msg.str());
    }
  }
  return out;
}

Mat5 uniform_ground_mixture() {
  Mat5 r = Mat5::Zero();
  for (int j = 0; j < 4; ++j) r(j, j) = 0.25;
  return r;
}

Mat5 dark_state_pair() { return pair_state(-1.0); }
Mat5 bright_state_pair() { return pair_state(1.0); }

double uhlmann_fidelity(const Mat5& a, const Mat5& b) {
  const Mat5 sa = sqrt_psd(a);
  const Mat5 inner = sa * b * sa;
  return sqrt_psd(inner).trace().real();
}

Preparation prepare_dark_states(const CPTParams& p, const LindbladOptions& opt) {
  Preparation out;
  out.rho = lindblad_evolve(uniform_ground_mixture(), p, p.T_prep, true, {}, opt);
  out.fidelity = uhlmann_fidelity(out.rho, dark_state_pair());
  return out;
}

Mat5 apply_block_unitaries(const Mat5& rho, const Mat2& U12, const Mat2& U34) {
  Mat5 U = Mat5::Identity();
  U.block<2, 2>(0, 0) = U12;
  U.block<2, 2>(2, 2) = U34;
  return U * rho * U.adjoint();
}

Mat5 sensing_evolution(const Mat5& rho, const TargetSignal& sig, const SignalTrace* noise,
                       const PulseTrain& train_pdd, const PulseTrain& train_cp,
                       const SensingOptions& opt) {
  validate(train_pdd);
  validate(train_cp);
  if (train_pdd.kind != SeqKind::PDD || train_cp.kind != SeqKind::CP)
    throw InputError("sensing needs a PDD train and a CP train");
  if (train_pdd.tau_m != train_cp.tau_m || train_pdd.n != train_cp.n)
    throw InputError("PDD and CP trains must share tau_m and n");
  PropagateOptions o12 = opt.propagate, o34 = opt.propagate;
  if (opt.strict_signs) o34.coupling_sign = -o34.coupling_sign;
  const Mat2 U12 = propagator_numeric(train_pdd, sig, noise, o12);
  const Mat2 U34 = propagator_numeric(train_cp, sig, noise, o34);
  return apply_block_unitaries(rho, U12, U34);
}

DetectionMap::DetectionMap(const CPTParams& p, const LindbladOptions& opt) {
  LindbladOptions o = opt;
  o.check = false;  // basis matrices are not states
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      Mat5 e = Mat5::Zero();
      e(i, j) = 1.0;
      coef_(i, j) = lindblad_evolve(e, p, p.T_detect, true, {}, o)(4, 4);
    }
  a_ = rho55(bright_state_pair());
  if (!(a_ > 0.0)) throw NumericalError("bright-state normalization vanished");
}

double DetectionMap::rho55(const Mat5& rho) const { return coef_.cwiseProduct(rho).sum().real(); }

Detection DetectionMap::detect(const Mat5& rho) const {
  const double v = rho55(rho);
  return {v, v / a_};
}

Detection detect_rho55(const Mat5& rho, const CPTParams& p, const LindbladOptions& opt) {
  const double v = lindblad_evolve(rho, p, p.T_detect, true, {}, opt)(4, 4).real();
  const double a = lindblad_evolve(bright_state_pair(), p, p.T_detect, true, {}, opt)(4, 4).real();
  return {v, v / a};
}

std::vector<double> tilde_rho55(std::span<const double> series) {
  if (series.size() < 2) throw InputError("need at least 2 samples");
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / series.size();
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = series[i] - mean;
  return out;
}

}  // namespace qdla
