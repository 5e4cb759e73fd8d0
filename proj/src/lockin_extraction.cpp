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

#include "qdla/lockin_extraction.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "qdla/errors.hpp"

namespace qdla {

namespace {

using cplx = std::complex<double>;

double dirichlet(int n, double u) {
  const double h = 0.5 * u;
  if (std::abs(h) < 1e-8) {
    // sin(n h)/sin(h) ~ n [1 - (n^2 - 1) h^2 / 6]
    return n * (1.0 - (double(n) * n - 1.0) * h * h / 6.0);
  }
  return std::sin(n * h) / std::sin(h);
}

struct WeakResidual {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  std::span<const double> tau, y;
  int n;
  double A0, w0, scale;

  int inputs() const { return 2; }
  int values() const { return static_cast<int>(y.size()); }
  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    for (std::size_t i = 0; i < y.size(); ++i)
      f[i] = (weak_sum_model(x[0] * A0, x[1] * w0, n, tau[i]) - y[i]) / scale;
    return 0;
  }
};

}  // namespace

const char* to_string(Regime r) { return r == Regime::WeakPup ? "weak" : "strong"; }

void validate(const MeasurementRecord& rec) {
  const auto m = rec.abscissa.size();
  if (rec.p_pdd.size() != m || rec.p_cp.size() != m)
    throw InputError("measurement arrays must have equal length");
  const double lo = rec.regime == Regime::WeakPup ? 0.0 : -1.0;
  for (auto* v : {&rec.p_pdd, &rec.p_cp})
    for (double p : *v)
      if (!(p >= lo - 1e-9 && p <= 1.0 + 1e-9))
        throw InputError("measurement value outside its range");
}

std::vector<double> weak_combined(const MeasurementRecord& rec) {
  if (rec.regime != Regime::WeakPup) throw InputError("weak combination needs P_up records");
  validate(rec);
  std::vector<double> s(rec.p_pdd.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = rec.p_pdd[i] + rec.p_cp[i];
  return s;
}

std::vector<double> strong_combined(const MeasurementRecord& rec) {
  if (rec.regime != Regime::StrongPz) throw InputError("strong combination needs P_z records");
  validate(rec);
  std::vector<double> s(rec.p_pdd.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = rec.p_pdd[i] + rec.p_cp[i];
  return s;
}

double weak_sum_model(double A, double omega, int n, double tau_m) {
  const double d = dirichlet(n, omega * tau_m - std::numbers::pi);
  return (A / omega) * (A / omega) * d * d;
}

WeakLock locate_lock_in_weak(std::span<const double> tau_grid, std::span<const double> curve,
                             double min_score, int min_lobe_points) {
  if (tau_grid.size() != curve.size() || curve.size() < 3)
    throw InputError("weak lock-in needs matching grid and curve of length >= 3");
  for (std::size_t i = 1; i < tau_grid.size(); ++i)
    if (!(tau_grid[i] > tau_grid[i - 1])) throw InputError("tau grid must be increasing");

  WeakLock r;
  const auto it = std::max_element(curve.begin(), curve.end());
  r.index = static_cast<std::size_t>(it - curve.begin());
  r.tau_hat = tau_grid[r.index];

  std::size_t lo = r.index, hi = r.index;
  while (lo > 0 && curve[lo - 1] < curve[lo]) --lo;
  while (hi + 1 < curve.size() && curve[hi + 1] < curve[hi]) ++hi;
  r.lobe_points = static_cast<int>(hi - lo + 1);
  if (r.lobe_points < min_lobe_points) {
    std::ostringstream msg;
    msg << "tau grid too coarse: " << r.lobe_points << " points under the main lobe";
    throw ResolutionError(msg.str());
  }

  const std::size_t K = std::min(r.index, curve.size() - 1 - r.index);
  if (K >= 2) {
    const std::size_t m = 2 * K + 1;
    Eigen::VectorXd a(m), b(m);
    for (std::size_t j = 0; j < m; ++j) {
      a[j] = curve[r.index - K + j];
      b[j] = curve[r.index + K - j];
    }
    a.array() -= a.mean();
    b.array() -= b.mean();
    const double den = a.norm() * b.norm();
    r.symmetry_score = den > 0.0 ? a.dot(b) / den : 1.0;
  }
  r.accepted = r.symmetry_score >= min_score;
  return r;
}

WeakFit fit_weak(const MeasurementRecord& rec, int n, const WeakLock& lock) {
  const auto y = weak_combined(rec);
  if (lock.index >= y.size()) throw InputError("lock index outside the record");
  const double peak = y[lock.index];
  if (!(peak > 0.0)) throw EstimationError("weak fit: no signal at the lock-in point");

  WeakResidual fn{rec.abscissa, y, n, 0.0, 0.0, peak};
  fn.w0 = std::numbers::pi / lock.tau_hat;
  fn.A0 = fn.w0 * std::sqrt(peak) / n;

  Eigen::VectorXd x(2);
  x << 1.0, 1.0;
  Eigen::NumericalDiff<WeakResidual> nd(fn);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<WeakResidual>> lm(nd);
  lm.parameters.xtol = 1e-12;
  lm.parameters.ftol = 1e-12;
  lm.parameters.maxfev = 2000;
  const auto status = lm.minimize(x);

  Eigen::VectorXd f(y.size());
  fn(x, f);
  WeakFit out;
  out.rms_residual = peak * f.norm() / std::sqrt(double(y.size()));
  const bool ok = status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
                  status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation &&
                  x.allFinite() && x[1] > 0.0;
  if (!ok) {
    std::ostringstream msg;
    msg << "weak fit did not converge (status " << int(status) << ", rms residual "
        << out.rms_residual << ")";
    throw EstimationError(msg.str());
  }
  out.A_hat = std::abs(x[0]) * fn.A0;
  out.omega_hat = x[1] * fn.w0;

  // P = (1 - cos phi)/2 inverted on [0, pi]
  auto phase = [](double p) { return std::acos(std::clamp(1.0 - 2.0 * p, -1.0, 1.0)); };
  const double pz = phase(rec.p_pdd[lock.index]);
  const double pc = phase(rec.p_cp[lock.index]);
  out.beta_hat_abs = std::atan2(pc, pz);
  return out;
}

double Spectrum::rate_of_bin(double k) const { return 2.0 * std::numbers::pi * k / n_m; }

Spectrum fft_spectrum(std::span<const cplx> series, int excluded_low_bins) {
  const int M = static_cast<int>(series.size());
  if (M < 4) throw InputError("spectrum needs at least 4 samples");
  std::vector<cplx> in(series.begin(), series.end()), out;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  Spectrum s;
  s.n_m = 2 * M;
  s.excluded_low_bins = excluded_low_bins;
  s.F.resize(M);
  // the sum starts at n = 2, one sample later than the FFT origin
  for (int k = 0; k < M; ++k)
    s.F[k] = out[k] * std::polar(1.0, -2.0 * std::numbers::pi * double(k) / M);
  return s;
}

Spectrum fft_spectrum(std::span<const double> series, int excluded_low_bins) {
  std::vector<cplx> c(series.begin(), series.end());
  return fft_spectrum(std::span<const cplx>(c), excluded_low_bins);
}

double ipr(const Spectrum& spec) {
  double s2 = 0.0, s4 = 0.0;
  for (int k = spec.excluded_low_bins; k < spec.bins(); ++k) {
    const double p = std::norm(spec.F[k]);
    s2 += p;
    s4 += p * p;
  }
  return s2 > 0.0 ? s4 / (s2 * s2) : 0.0;
}

StrongLock locate_lock_in_strong(std::span<const double> tau_grid, std::span<const double> ipr_curve,
                                 std::optional<double> tau_true, double min_contrast) {
  if (tau_grid.size() != ipr_curve.size() || tau_grid.empty())
    throw InputError("strong lock-in needs matching grid and IPR curve");
  StrongLock r;
  const auto [mn, mx] = std::minmax_element(ipr_curve.begin(), ipr_curve.end());
  r.index = static_cast<std::size_t>(mx - ipr_curve.begin());
  r.tau_hat = tau_grid[r.index];
  r.ipr_max = *mx;
  r.ipr_min = *mn;
  if (r.ipr_max - r.ipr_min < min_contrast) {
    std::ostringstream msg;
    msg << "IPR curve is flat (max - min = " << r.ipr_max - r.ipr_min << ")";
    throw NoLockError(msg.str());
  }
  if (tau_true) r.shift_D = r.tau_hat - *tau_true;
  return r;
}

ChannelPeak channel_peak(const Spectrum& spec, double flat_threshold) {
  const int M = spec.bins();
  const int hi = M / 2;
  ChannelPeak p;
  int kb = -1;
  for (int k = spec.excluded_low_bins; k <= hi && k < M; ++k)
    if (kb < 0 || std::abs(spec.F[k]) > std::abs(spec.F[kb])) kb = k;
  if (kb < 0) return p;
  p.magnitude = std::abs(spec.F[kb]);
  // a unit-amplitude oscillation puts about M/2 into its bin
  if (p.magnitude < flat_threshold * 0.5 * M) return p;
  if (kb >= hi - 2) {
    std::ostringstream msg;
    msg << "spectral peak at bin " << kb << " is within 2 bins of the folding point " << hi;
    throw AliasingError(msg.str());
  }
  double delta = 0.0;
  if (kb > 0 && kb + 1 < M) {
    const double a = std::abs(spec.F[kb - 1]), b = p.magnitude, c = std::abs(spec.F[kb + 1]);
    const double den = a - 2.0 * b + c;
    if (den < 0.0) delta = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
  }
  p.k_star = kb + delta;
  p.rate = spec.rate_of_bin(p.k_star);
  return p;
}

StrongFit extract_from_fft_frequencies(double omega_fft_pdd, double omega_fft_cp) {
  StrongFit f;
  f.omega_fft_pdd = std::abs(omega_fft_pdd);
  f.omega_fft_cp = std::abs(omega_fft_cp);
  f.A_hat = 0.5 * std::hypot(f.omega_fft_pdd, f.omega_fft_cp);
  f.beta_hat_abs = f.A_hat > 0.0 ? std::atan2(f.omega_fft_cp, f.omega_fft_pdd) : 0.0;
  return f;
}

StrongFit extract_A_beta_strong(const Spectrum& spec_pdd, const Spectrum& spec_cp, double omega) {
  if (!(omega > 0.0)) throw InputError("omega must be > 0");
  const auto pp = channel_peak(spec_pdd);
  const auto pc = channel_peak(spec_cp);
  const int M = spec_pdd.bins();
  if (pp.k_star > 0.0 && pc.k_star > 0.0 &&
      (std::abs(pp.k_star - (M - pc.k_star)) <= 2.0 || std::abs(pc.k_star - (M - pp.k_star)) <= 2.0))
    throw AliasingError("channel peak coincides with the mirror of the other channel");
  return extract_from_fft_frequencies(omega * pp.rate, omega * pc.rate);
}

}  // namespace qdla
