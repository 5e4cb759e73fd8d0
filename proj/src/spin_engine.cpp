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

#include "qdla/spin_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "qdla/errors.hpp"

namespace qdla {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx kI(0.0, 1.0);

// sin(n u / 2) / sin(u / 2)
double dirichlet_ratio(int n, double u) {
  if (std::abs(u) < 1e-8) return n * (1.0 - (static_cast<double>(n) * n - 1.0) * u * u / 24.0);
  return std::sin(0.5 * n * u) / std::sin(0.5 * u);
}

Mat2 diag_phase(double theta) {
  Mat2 d = Mat2::Zero();
  d(0, 0) = std::exp(-0.5 * kI * theta);
  d(1, 1) = std::exp(0.5 * kI * theta);
  return d;
}

using U4 = std::array<cplx, 4>;  // column-major 2x2

U4 to_u4(const Mat2& m) { return {m(0, 0), m(1, 0), m(0, 1), m(1, 1)}; }
Mat2 from_u4(const U4& u) {
  Mat2 m;
  m << u[0], u[2], u[1], u[3];
  return m;
}

// Walks one sequence kind up to n_max, recording propagators at requested n.
class Walker {
 public:
  Walker(SeqKind kind, double tau_m, double width, const TargetSignal& sig, const SignalTrace* noise,
         const PropagateOptions& opt)
      : kind_(kind), tau_m_(tau_m), width_(width), sig_(sig), noise_(noise), opt_(opt) {}

  std::vector<Mat2> run(const std::vector<int>& ns) {
    std::vector<Mat2> out;
    if (ns.empty()) return out;
    const int n_max = ns.back();
    const int pulses = kind_ == SeqKind::PDD ? n_max - 1 : n_max;
    U_ = Mat2::Identity();
    t_ = 0.0;
    k_ = 0;
    std::size_t next = 0;
    auto readout_time = [&](std::size_t i) { return ns[i] * tau_m_; };
    for (int j = 1; j <= pulses; ++j) {
      const double c = kind_ == SeqKind::PDD ? j * tau_m_ : (j - 0.5) * tau_m_;
      const double start = c - 0.5 * width_;
      // readouts strictly before this window
      const double tol = 1e-12 * tau_m_ * n_max;
      while (next < ns.size() && readout_time(next) <= start + tol &&
             std::abs(readout_time(next) - c) > tol) {
        free_to(readout_time(next));
        out.push_back(U_);
        ++next;
      }
      free_to(start);
      // PDD readout whose final boundary coincides with this pulse centre
      if (next < ns.size() && std::abs(readout_time(next) - c) <= tol) {
        out.push_back(branch_free(c));
        ++next;
      }
      if (width_ == 0.0) {
        ++k_;
      } else {
        window(start, c + 0.5 * width_);
      }
    }
    while (next < ns.size()) {
      free_to(readout_time(next));
      out.push_back(U_);
      ++next;
    }
    return out;
  }

 private:
  double h() const { return k_ % 2 == 0 ? 1.0 : -1.0; }

  double noise_integral(double a, double b) const {
    if (!noise_) return 0.0;
    return noise_->integral_between(a, b);
  }

  // diagonal evolution exp(-i theta sz / 2) for the free stretch [a, b]
  Mat2 free_map(double a, double b) const {
    const double theta =
        opt_.coupling_sign * h() * (target_integral(sig_, a, b) + sig_.amplitude_A * noise_integral(a, b));
    return diag_phase(theta);
  }

  Mat2 branch_free(double b) const {
    if (b <= t_) return U_;
    if (opt_.exact_free_segments) return free_map(t_, b) * U_;
    Mat2 u = U_;
    integrate_pieces(u, t_, b, false, 0.0);
    return u;
  }

  void free_to(double b) {
    if (b <= t_) return;
    if (opt_.exact_free_segments) {
      U_ = free_map(t_, b) * U_;
    } else {
      integrate_pieces(U_, t_, b, false, 0.0);
    }
    t_ = b;
  }

  void window(double a, double b) {
    integrate_pieces(U_, a, b, true, a);
    t_ = b;
    ++k_;
  }

  // RK over [a, b], split at noise knots for sampled noise
  void integrate_pieces(Mat2& U, double a, double b, bool in_window, double win_start) const {
    std::vector<double> cuts{a};
    std::vector<std::size_t> segs;
    if (noise_ && !noise_->tone) {
      const std::size_t ka = noise_->knot(a);
      const std::size_t kb = noise_->knot(b);
      for (std::size_t s = ka; s < kb; ++s) {
        segs.push_back(s);
        cuts.push_back(s + 1 == kb ? b : noise_->times[s + 1]);
      }
    } else {
      cuts.push_back(b);
      segs.push_back(0);
    }
    U4 x = to_u4(U);
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
      const std::size_t seg = segs[p];
      auto rhs = [&](const U4& u, U4& du, double t) {
        double noise_v = 0.0;
        if (noise_) noise_v = noise_->value_in(seg, t);
        const double M = opt_.coupling_sign * (target_value(sig_, t) + sig_.amplitude_A * noise_v);
        double ca = h(), sa = 0.0;
        if (in_window) {
          const double al = kPi * (k_ + (t - win_start) / width_);
          ca = std::cos(al);
          sa = std::sin(al);
        }
        // H = M/2 [[ca, -i sa], [i sa, -ca]]
        const cplx h00 = 0.5 * M * ca, h01 = -0.5 * M * sa * kI, h10 = 0.5 * M * sa * kI,
                   h11 = -0.5 * M * ca;
        for (int col = 0; col < 2; ++col) {
          const cplx a0 = u[2 * col], a1 = u[2 * col + 1];
          du[2 * col] = -kI * (h00 * a0 + h01 * a1);
          du[2 * col + 1] = -kI * (h10 * a0 + h11 * a1);
        }
      };
      const double span = cuts[p + 1] - cuts[p];
      integrate_adaptive_dp(rhs, x, cuts[p], cuts[p + 1], opt_.tol, span / 8.0);
    }
    U = from_u4(x);
  }

  SeqKind kind_;
  double tau_m_;
  double width_;
  TargetSignal sig_;
  const SignalTrace* noise_;
  PropagateOptions opt_;
  Mat2 U_ = Mat2::Identity();
  double t_ = 0.0;
  int k_ = 0;
};

}  // namespace

double PhasePair::magnitude() const { return std::hypot(phi_z, phi_y); }

double phase_ideal_exact(const PulseTrain& train, const TargetSignal& sig) {
  validate(train);
  if (!train.is_delta()) throw InputError("phase_ideal_exact needs delta pulses");
  double phi = 0.0, start = 0.0, h = 1.0;
  for (int j = 1; j <= train.pulse_count(); ++j) {
    const double c = train.center(j);
    phi += h * target_integral(sig, start, c);
    start = c;
    h = -h;
  }
  phi += h * target_integral(sig, start, train.t_n());
  return phi;
}

double phase_closed_form(const PulseTrain& train, const TargetSignal& sig) {
  validate(train);
  if (!train.is_delta()) throw InputError("phase_closed_form needs delta pulses");
  const double w = sig.omega, b = sig.beta, ratio = sig.amplitude_A / w;
  const int n = train.n;
  const double u = w * train.tau_m - kPi;  // omega (tau_m - tau)
  const double d = dirichlet_ratio(n, u);
  if (train.kind == SeqKind::PDD)
    return 2.0 * ratio * std::cos(0.5 * n * u + b) * std::cos(0.5 * u) * d;
  return 2.0 * ratio * std::sin(0.5 * n * u + b) * (1.0 + std::sin(0.5 * u)) * d;
}

PhasePair phase_finite_pulse(const PulseTrain& train, const TargetSignal& sig) {
  validate(train);
  if (train.is_delta()) throw InputError("phase_finite_pulse needs square pulses");
  const double w = sig.omega, b = sig.beta, A = sig.amplitude_A;
  const double wo = kPi / train.pulse_width;
  if (std::abs(w - wo) < 1e-6 * w)
    throw SingularConfigurationError("signal frequency coincides with pi / T_Omega");
  const double K = std::cos(0.5 * w * train.pulse_width) * (1.0 / (w + wo) - 1.0 / (w - wo));
  const int np = train.pulse_count();
  double sum_c = 0.0, sum_s = 0.0;
  for (int j = 1; j <= np; ++j) {
    const double arg = w * train.center(j) + b;
    const double sgn = j % 2 == 0 ? 1.0 : -1.0;  // (-1)^j
    sum_c += sgn * std::cos(arg);
    sum_s -= sgn * std::sin(arg);
  }
  const double end_sign = np % 2 == 0 ? 1.0 : -1.0;  // (-1)^{N_p}
  PhasePair p;
  p.phi_z = A / w * (std::cos(b) - end_sign * std::cos(w * train.t_n() + b)) + A / w * wo * K * sum_c;
  p.phi_y = A * K * sum_s;
  return p;
}

Mat2 propagator_numeric(const PulseTrain& train, const TargetSignal& sig, const SignalTrace* noise,
                        const PropagateOptions& opt) {
  validate(train);
  Walker w(train.kind, train.tau_m, train.pulse_width, sig, noise, opt);
  return w.run({train.n}).front();
}

QubitState propagate_numeric(const PulseTrain& train, const TargetSignal& sig,
                             const SignalTrace* noise, const QubitState& state0,
                             const PropagateOptions& opt) {
  if (std::abs(state0.norm2() - 1.0) > 1e-12) throw InputError("initial state must be normalized");
  return apply_unitary(propagator_numeric(train, sig, noise, opt), state0);
}

std::vector<Mat2> propagator_series(SeqKind kind, double tau_m, double pulse_width,
                                    const std::vector<int>& ns, const TargetSignal& sig,
                                    const SignalTrace* noise, const PropagateOptions& opt) {
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] < 2 || ns[i] % 2) throw InputError("series n values must be even and >= 2");
    if (i && ns[i] <= ns[i - 1]) throw InputError("series n values must be ascending");
  }
  if (!ns.empty()) validate(PulseTrain{kind, tau_m, ns.back(), pulse_width});
  Walker w(kind, tau_m, pulse_width, sig, noise, opt);
  return w.run(ns);
}

std::vector<double> phase_series_delta(SeqKind kind, double tau_m, const std::vector<int>& ns,
                                       const TargetSignal& sig, const SignalTrace* noise,
                                       double coupling_sign) {
  std::vector<double> out;
  out.reserve(ns.size());
  double phi = 0.0, start = 0.0, h = 1.0;
  int j = 1;
  const double A = sig.amplitude_A;
  auto piece = [&](double a, double b) {
    double v = target_integral(sig, a, b);
    if (noise) v += A * noise->integral_between(a, b);
    return v;
  };
  for (int n : ns) {
    const double tn = n * tau_m;
    const int pulses = kind == SeqKind::PDD ? n - 1 : n;
    for (; j <= pulses; ++j) {
      const double c = kind == SeqKind::PDD ? j * tau_m : (j - 0.5) * tau_m;
      phi += h * piece(start, c);
      start = c;
      h = -h;
    }
    const double partial = h * piece(start, tn);
    out.push_back(coupling_sign * (phi + partial));
  }
  return out;
}

std::vector<double> required_knots(double tau_m, double pulse_width, int n_max,
                                   const NoiseModel& noise) {
  std::vector<double> t;
  t.reserve(4 * n_max + 2);
  for (int k = 0; k <= 2 * n_max; ++k) t.push_back(k * 0.5 * tau_m);
  if (pulse_width > 0.0) {
    const auto* wg = std::get_if<WhiteGaussian>(&noise);
    for (int j = 1; j <= n_max; ++j) {
      for (double c : {j * tau_m, (j - 0.5) * tau_m}) {
        if (c >= n_max * tau_m) continue;
        const double a = c - 0.5 * pulse_width, b = c + 0.5 * pulse_width;
        t.push_back(a);
        t.push_back(b);
        if (wg && wg->sigma > 0.0) {
          const double dt = wg->sample_dt;
          for (double e = std::ceil(a / dt) * dt; e < b; e += dt) t.push_back(e);
        }
      }
    }
  }
  std::sort(t.begin(), t.end());
  std::vector<double> out;
  out.reserve(t.size());
  const double tol = 1e-12 * tau_m;
  for (double x : t)
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  return out;
}

DysonResult dyson_second_order(const PhasePair& phi) {
  const double th = phi.magnitude();
  DysonResult r;
  r.in_domain = th <= 1.0;
  Mat2 U = Mat2::Identity() * std::cos(0.5 * th);
  if (th > 0.0) {
    const double s = std::sin(0.5 * th) / th;
    Mat2 g;
    g << cplx(phi.phi_z, 0.0), cplx(0.0, -phi.phi_y), cplx(0.0, phi.phi_y), cplx(-phi.phi_z, 0.0);
    U += -kI * s * g;
  }
  r.U = U;
  return r;
}

PhasePair phases_from_unitary(const Mat2& U) {
  // U = e^{i g} [cos(th/2) I - i sin(th/2) n.sigma]; principal branch th in [0, pi]
  const cplx g = std::sqrt(U.determinant());
  Mat2 V = U / g;
  if ((V(0, 0) + V(1, 1)).real() < 0.0) V = -V;
  const double c = std::clamp(0.5 * (V(0, 0) + V(1, 1)).real(), -1.0, 1.0);
  const double th = 2.0 * std::acos(c);
  const double s = std::sin(0.5 * th);
  PhasePair p;
  if (s < 1e-300) return p;
  const double nz = (kI * (V(0, 0) - V(1, 1)) / (2.0 * s)).real();
  const double ny = ((V(1, 0) - V(0, 1)) / (2.0 * s)).real();
  p.phi_z = th * nz;
  p.phi_y = th * ny;
  return p;
}

double readout_p_up(double phi_n) { return 0.5 * (1.0 - std::cos(phi_n)); }
double readout_p_up(const PhasePair& phi) { return readout_p_up(phi.magnitude()); }
double readout_p_z(double phi_n) { return -std::cos(phi_n); }

double readout_p_up(const QubitState& s) { return 0.5 * std::norm(s.up - s.down); }
double readout_p_z(const QubitState& s) { return 2.0 * readout_p_up(s) - s.norm2(); }

QubitState apply_unitary(const Mat2& U, const QubitState& s) {
  return QubitState{U(0, 0) * s.up + U(0, 1) * s.down, U(1, 0) * s.up + U(1, 1) * s.down};
}

double state_fidelity(const QubitState& a, const QubitState& b) {
  return std::norm(std::conj(a.up) * b.up + std::conj(a.down) * b.down);
}

Mat2 evolve_with_decay(const PulseTrain& train, const TargetSignal& sig, const DecayChannel& decay,
                       double t, const OdeTolerance& tol) {
  validate(train);
  if (!train.is_delta()) throw InputError("evolve_with_decay needs delta pulses");
  if (!(decay.gamma >= 0.0)) throw InputError("decay rate must be >= 0");
  if (t < 0.0 || t > train.t_n() * (1.0 + 1e-12)) throw InputError("time outside [0, t_n]");
  // rho as (r00, r10, r01, r11), interaction picture; the lab-frame sigma_minus
  // becomes sigma_minus for h = +1 and sigma_plus for h = -1
  U4 r = {0.5, 0.5, 0.5, 0.5};
  const double g = decay.gamma;
  double start = 0.0, h = 1.0;
  auto seg = [&](double a, double b) {
    auto rhs = [&](const U4& x, U4& dx, double tt) {
      const double wz = h * target_value(sig, tt);
      const cplx r00 = x[0], r10 = x[1], r01 = x[2], r11 = x[3];
      // coherent part with H = wz/2 sz
      dx[0] = 0.0;
      dx[3] = 0.0;
      dx[2] = -kI * wz * r01;
      dx[1] = kI * wz * r10;
      // decay toward down (h=+1) or up (h=-1)
      if (h > 0) {
        dx[0] += -g * r00;
        dx[3] += g * r00;
      } else {
        dx[0] += g * r11;
        dx[3] += -g * r11;
      }
      dx[1] += -0.5 * g * r10;
      dx[2] += -0.5 * g * r01;
    };
    integrate_adaptive_dp(rhs, r, a, b, tol, (b - a) / 8.0);
  };
  for (int j = 1; j <= train.pulse_count(); ++j) {
    const double c = train.center(j);
    if (c >= t) break;
    seg(start, c);
    start = c;
    h = -h;
  }
  seg(start, t);
  Mat2 m;
  m << r[0], r[2], r[1], r[3];
  return m;
}

}  // namespace qdla
