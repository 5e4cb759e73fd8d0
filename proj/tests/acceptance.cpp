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

// Acceptance checks: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion ...]   (no arguments runs all of them)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qdla/classical_reference.hpp"
#include "qdla/cpt_simulator.hpp"
#include "qdla/dd_sequences.hpp"
#include "qdla/errors.hpp"
#include "qdla/experiment_harness.hpp"
#include "qdla/lockin_extraction.hpp"
#include "qdla/spin_engine.hpp"

using namespace qdla;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBeta = -kPi / 6;
const double kGamma = std::abs(CPTParams{}.gamma_g);  // rad/(s T)
const double kOmegaRb = 2 * kPi * 5e4;                // 50 kHz signal
const double kTauRb = kPi / kOmegaRb;                 // 10 us

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double step_of(const std::vector<double>& g) { return g[1] - g[0]; }

ScanSpec strong_reference(int n_m, double rel_span, int points) {
  ScanSpec s;
  s.signal = make_signal(2.0, kPi, kBeta);
  s.n_m = n_m;
  s.tau_grid = tau_grid_around(1.0, rel_span, points);
  return s;
}

ScanSpec cpt_spec(double B0, double width) {
  ScanSpec s;
  s.platform = Platform::CPT;
  s.signal = make_signal(kGamma * B0, kOmegaRb, kBeta);
  s.pulse_width = width;
  return s;
}

// 1. closed form against the exact per-segment integral
Outcome c1() {
  constexpr double kTol = 1e-9, kRuntime = 1.0;
  Clock clk;
  const auto grid = tau_grid_around(1.0, 0.05, 201);
  double worst = 0.0;
  for (double beta : {0.0, kPi / 6, kPi / 2}) {
    const auto s = make_signal(0.01, kPi, beta);
    for (SeqKind k : {SeqKind::PDD, SeqKind::CP})
      for (double t : grid) {
        const PulseTrain tr{k, t, 100, 0.0};
        worst = std::max(worst, std::abs(phase_closed_form(tr, s) - phase_ideal_exact(tr, s)));
      }
  }
  const double dt = clk.seconds();
  return {worst < kTol && dt < kRuntime, fmt("max |closed - exact| = %.3g rad (< %.0e), %.3f s (< %.0f s)",
                                              worst, kTol, dt, kRuntime)};
}

// 2. weak-signal symmetry and recovery
Outcome c2() {
  constexpr double kScore = 0.999, kRelA = 0.01, kBetaTol = 0.02, kRuntime = 10.0;
  Clock clk;
  ScanSpec s;
  s.n = 100;
  s.signal = make_signal(0.1 * kPi / (2 * s.n), kPi, kBeta);
  s.tau_grid = tau_grid_around(1.0, 0.05, 201);
  const auto r = run_weak_scan(s);
  const double dt = clk.seconds();
  const double dtau = std::abs(r.lock.tau_hat - 1.0);
  const double dA = std::abs(r.fit->A_hat / s.signal.amplitude_A - 1.0);
  const double dB = std::abs(r.fit->beta_hat_abs - kPi / 6);
  const bool ok = r.lock.symmetry_score >= kScore && dtau <= step_of(s.tau_grid) * (1 + 1e-9) && dA < kRelA &&
                  dB < kBetaTol && dt < kRuntime;
  return {ok, fmt("score %.5f (>= %.3f), |tau_hat - tau| = %.3g (step %.3g), A rel err %.2e (< %.2f), "
                  "beta err %.2e rad (< %.2f), %.2f s",
                  r.lock.symmetry_score, kScore, dtau, step_of(s.tau_grid), dA, kRelA, dB, kBetaTol, dt)};
}

struct StrongCheck {
  bool ok;
  std::string detail;
};

StrongCheck strong_tolerances(const StrongScanResult& r, double scale) {
  const double kPeak = 0.02 * scale, kRelA = 0.02 * scale, kBetaTol = 0.02 * scale;
  const double cp = r.peak_cp.rate, pdd = r.peak_pdd.rate;
  const double dA = std::abs(r.fit.A_hat / 2.0 - 1.0), dB = std::abs(r.fit.beta_hat_abs - kPi / 6);
  const bool ok = std::abs(cp - 0.637) <= kPeak && std::abs(pdd - 1.103) <= kPeak && dA <= kRelA && dB <= kBetaTol;
  return {ok, fmt("peaks %.4f / %.4f (0.637 / 1.103 +- %.2f), A rel err %.2e (<= %.2f), beta err %.2e (<= %.2f)",
                  cp, pdd, kPeak, dA, kRelA, dB, kBetaTol)};
}

// 3. strong-signal FFT extraction
Outcome c3() {
  const auto r = run_strong_scan(strong_reference(400, 0.01, 41));
  const auto c = strong_tolerances(r, 1.0);
  return {c.ok && r.lock.tau_hat == 1.0, c.detail + fmt(", tau_hat %.4f", r.lock.tau_hat)};
}

// 4. IPR localization and the lock-in shift
Outcome c4() {
  constexpr double kLo = 0.20, kHi = 0.30, kOff = 0.05;
  const auto s = make_signal(2.0, kPi, kBeta);
  auto ipr_at = [&](double tau_m, int n_m) {
    std::vector<int> ns;
    for (int n = 2; n <= n_m; n += 2) ns.push_back(n);
    auto pz = phase_series_delta(SeqKind::PDD, tau_m, ns, s, nullptr);
    const auto cp = phase_series_delta(SeqKind::CP, tau_m, ns, s, nullptr);
    for (std::size_t i = 0; i < pz.size(); ++i) pz[i] = readout_p_z(pz[i]) + readout_p_z(cp[i]);
    return ipr(fft_spectrum(pz));
  };
  const double at = ipr_at(1.0, 400);
  // off lock-in: omega |tau_m - tau| from 0.05 to 0.30
  double worst_off = 0.0, worst_u = 0.0;
  for (int i = 0; i <= 50; ++i) {
    const double u = 0.05 + 0.005 * i;
    for (double sgn : {-1.0, 1.0}) {
      const double v = ipr_at(1.0 + sgn * u / kPi, 400);
      if (v > worst_off) worst_off = v, worst_u = sgn * u;
    }
  }
  // shift D across n_m on a +-2% grid
  std::vector<double> D;
  for (int n_m : {100, 200, 400}) {
    const auto grid = tau_grid_around(1.0, 0.02, 81);
    std::vector<double> curve;
    for (double t : grid) curve.push_back(ipr_at(t, n_m));
    D.push_back(std::abs(*locate_lock_in_strong(grid, curve, 1.0).shift_D));
  }
  const bool mono = D[1] <= D[0] + 1e-12 && D[2] <= D[1] + 1e-12;
  const bool ok = at >= kLo && at <= kHi && worst_off < kOff && mono;
  return {ok, fmt("IPR(tau) = %.4f (in [%.2f, %.2f]); max off-lock IPR %.4f at u = %+.3f (< %.2f); "
                  "|D| for n_m 100/200/400 = %.4g / %.4g / %.4g (non-increasing: %s)",
                  at, kLo, kHi, worst_off, worst_u, kOff, D[0], D[1], D[2], mono ? "yes" : "no")};
}

// 5. dark-state preparation
Outcome c5() {
  constexpr double kFid = 0.99, kRuntime = 60.0;
  Clock clk;
  CPTParams p;
  p.T_prep = 1e-4;
  const auto prep = prepare_dark_states(p);
  const double dt = clk.seconds();
  return {prep.fidelity >= kFid && dt < kRuntime,
          fmt("fidelity %.8f (>= %.2f) at T_prep = 0.1 ms, %.2f s (< %.0f s)", prep.fidelity, kFid, dt, kRuntime)};
}

// 6. CPT weak pipeline against the small-signal predictor
Outcome c6() {
  constexpr double kRelDev = 0.10;
  auto s = cpt_spec(1e-9, 2e-6);
  s.n = 200;
  s.tau_grid = tau_grid_around(kTauRb, 0.05, 201);
  const auto r = run_weak_scan(s);
  double peak = 0.0, dev = 0.0;
  for (std::size_t i = 0; i < s.tau_grid.size(); ++i) {
    const double pred = 0.5 * weak_sum_model(s.signal.amplitude_A, kOmegaRb, s.n, s.tau_grid[i]);
    peak = std::max(peak, pred);
    dev = std::max(dev, std::abs(r.rho55_normalized[i] - pred));
  }
  const double rel = dev / peak, dtau = std::abs(r.lock.tau_hat - kTauRb);
  const bool ok = rel < kRelDev && dtau <= step_of(s.tau_grid) * (1 + 1e-9);
  return {ok, fmt("max |rho55/a - predictor| / predictor peak = %.4f (< %.2f); tau_hat - tau = %.3g s (step %.3g s)",
                  rel, kRelDev, r.lock.tau_hat - kTauRb, step_of(s.tau_grid))};
}

// 7. CPT strong pipeline
Outcome c7() {
  constexpr double kPeak = 0.05, kRelB = 0.05;
  auto s = cpt_spec(2e-6, 2e-6);
  s.n_m = 400;
  s.tau_grid = tau_grid_around(kTauRb, 0.01, 41);
  const auto r = run_strong_scan(s);
  const double B = r.fit.A_hat / kGamma, dB = std::abs(B / 2e-6 - 1.0);
  const double cp = r.peak_cp.rate, pdd = r.peak_pdd.rate;
  const bool ok = std::abs(cp - 0.587) <= kPeak && std::abs(pdd - 0.968) <= kPeak && dB < kRelB;
  return {ok, fmt("peaks %.4f / %.4f (0.587 / 0.968 +- %.2f); B0_hat = %.5g T, rel err %.4f (< %.2f)", cp, pdd,
                  kPeak, B, dB, kRelB)};
}

// 8. finite-pulse robustness
Outcome c8() {
  constexpr double kRel = 0.05;
  bool ok = true;
  std::ostringstream os;
  double worstB = 0.0, worstBeta = 0.0;
  for (double w : {0.0, 0.5e-6, 1e-6, 1.5e-6, 2e-6}) {  // up to 0.2 tau
    auto s = cpt_spec(2e-6, w);
    s.n_m = 400;
    s.tau_grid = tau_grid_around(kTauRb, 0.01, 41);
    const auto r = run_strong_scan(s);
    worstB = std::max(worstB, std::abs(r.fit.A_hat / s.signal.amplitude_A - 1.0));
    worstBeta = std::max(worstBeta, std::abs(r.fit.beta_hat_abs / (kPi / 6) - 1.0));
  }
  ok = worstB < kRel && worstBeta < kRel;
  os << fmt("T_Omega <= 0.2 tau: max |dB0|/B0 = %.4f, max |dbeta|/|beta| = %.4f (< %.2f)", worstB, worstBeta, kRel);
  for (double w : {0.0, 2e-6, 4e-6}) {
    auto sw = cpt_spec(1e-9, w);
    sw.n = 200;
    sw.tau_grid = tau_grid_around(kTauRb, 0.05, 201);
    const auto rw = run_weak_scan(sw);
    auto ss = cpt_spec(2e-6, w);
    ss.n_m = 400;
    ss.tau_grid = tau_grid_around(kTauRb, 0.01, 41);
    const auto rs = run_strong_scan(ss);
    const bool wk = std::abs(rw.lock.tau_hat - kTauRb) <= step_of(sw.tau_grid) * (1 + 1e-9);
    const bool st = std::abs(rs.lock.tau_hat - kTauRb) <= step_of(ss.tau_grid) * (1 + 1e-9);
    ok = ok && wk && st;
    os << fmt("; T_Omega %.0f us lock weak %s strong %s", w * 1e6, wk ? "ok" : "shifted", st ? "ok" : "shifted");
  }
  return {ok, os.str()};
}

// 9. white-noise robustness
Outcome c9() {
  bool ok = true;
  std::ostringstream os;
  {
    auto s = cpt_spec(1e-9, 0.0);
    s.n = 200;
    s.tau_grid = tau_grid_around(kTauRb, 0.05, 201);
    s.noise = WhiteGaussian{100.0, kDefaultSampleDtOverTau * kTauRb};
    s.averages = 20;
    WeakScanResult partial;
    double tau_hat;
    bool accepted = true;
    try {
      tau_hat = run_weak_scan(s, &partial).lock.tau_hat;
    } catch (const NoLockError&) {
      accepted = false;
      tau_hat = partial.lock.tau_hat;
    }
    const bool within = std::abs(tau_hat - kTauRb) <= step_of(s.tau_grid) * (1 + 1e-9);
    ok = accepted && within;
    os << fmt("weak sigma=100 x20: lock %s, tau_hat - tau = %.3g s (step %.3g s)", accepted ? "accepted" : "rejected",
              tau_hat - kTauRb, step_of(s.tau_grid));
  }
  for (double sigma : {5.0, 10.0}) {
    auto s = strong_reference(400, 0.01, 41);
    s.noise = WhiteGaussian{sigma, kDefaultSampleDtOverTau * 1.0};
    s.averages = 20;
    const auto r = run_strong_scan(s);
    const auto c = strong_tolerances(r, 2.0);
    ok = ok && c.ok && r.lock.tau_hat == 1.0;
    os << fmt("; strong sigma=%.0f x20: ", sigma) << c.detail;
  }
  return {ok, os.str()};
}

// 10. classical mixer and integrator
Outcome c10() {
  constexpr double kRelA = 0.01, kBetaTol = 0.01;
  const auto s = make_signal(1.0, kOmegaRb, kBeta);
  const auto iq = mix_and_integrate(s, nullptr, kOmegaRb, 100 * 2 * kPi / kOmegaRb);
  const auto e = extract_classical(iq);
  const double dA = std::abs(e.A_hat - 1.0), dB = std::abs(e.beta_hat - kBeta);
  return {dA < kRelA && dB < kBetaTol,
          fmt("A rel err %.2e (< %.2f), beta_hat %.6f vs %.6f (err %.2e < %.2f)", dA, kRelA, e.beta_hat, kBeta, dB,
              kBetaTol)};
}

// 11. filter function of CP
Outcome c11() {
  constexpr double kPeakRel = 0.05, kSecond = 0.01;
  const double tau_m = 1.0;
  const PulseTrain cp{SeqKind::CP, tau_m, 32, 0.0};
  const double tn = cp.t_n(), ref = 4 * tn * tn / (kPi * kPi);
  const double at = filter_function(cp, kPi / tau_m), second = filter_function(cp, 2 * kPi / tau_m);
  const double rel = std::abs(at / ref - 1.0);
  return {rel < kPeakRel && second <= kSecond * at,
          fmt("F(pi/tau_m) = %.6g vs 4 t_n^2/pi^2 = %.6g (rel %.2e < %.2f); F(2pi/tau_m)/peak = %.2e (<= %.2f)", at, ref,
              rel, kPeakRel, second / at, kSecond)};
}

// 12. second-order Dyson map inside its domain
Outcome c12() {
  constexpr double kDomain = 0.3, kFid = 1e-3;
  double worst = 1.0;
  int used = 0;
  for (double B0 : {1e-9, 3e-9, 1e-8, 3e-8})
    for (double width : {1e-6, 2e-6, 4e-6})
      for (double off : {-0.02, 0.0, 0.02})
        for (SeqKind k : {SeqKind::PDD, SeqKind::CP}) {
          const auto s = make_signal(kGamma * B0, kOmegaRb, kBeta);
          const PulseTrain tr{k, kTauRb * (1 + off), 200, width};
          const auto phi = phase_finite_pulse(tr, s);
          if (phi.magnitude() > kDomain) continue;
          const auto a = apply_unitary(dyson_second_order(phi).U, QubitState{});
          const auto b = propagate_numeric(tr, s, nullptr, QubitState{});
          worst = std::min(worst, state_fidelity(a, b));
          ++used;
        }
  return {used >= 10 && worst >= 1.0 - kFid,
          fmt("%d runs with |phi| <= %.1f, min fidelity %.8f (>= 1 - %.0e)", used, kDomain, worst, kFid)};
}

// 13. mains noise: Monte Carlo against the Bessel average
Outcome c13() {
  constexpr double kDev = 0.02;
  const auto s = make_signal(kGamma * 1e-9, kOmegaRb, kBeta);
  Mains m;
  m.amplitude_Nn = 1e3;
  m.omega_ma = kOmegaRb * 1e-3;  // omega / omega_ma = 10^3
  const auto chk = mains_average_check(s, m, kTauRb, 200, 10000, 7);
  bool cp_better = true;
  double ratio = 0.0;
  for (const auto& r : chk.rows) {
    const double dp = 1.0 - std::cyl_bessel_j(0.0, r.N_pdd), dc = 1.0 - std::cyl_bessel_j(0.0, r.N_cp);
    cp_better = cp_better && dc <= dp + 1e-15;
    if (r.N_cp > 0.0) ratio = std::max(ratio, r.N_pdd / r.N_cp);
  }
  return {chk.max_deviation <= kDev && cp_better,
          fmt("max |MC - CF| / max(1, |CF|) = %.3g (<= %.2f) over %zu n values, 10^4 draws; CP degradation <= PDD: %s "
              "(max N_pdd/N_cp %.4g)",
              chk.max_deviation, kDev, chk.rows.size(), cp_better ? "yes" : "no", ratio)};
}

// 14. ground-state decay
Outcome c14() {
  constexpr double kTol = 1e-6;
  const double g = 2 * kPi * 250.0, t = 2e-3;
  const PulseTrain tr{SeqKind::PDD, kTauRb, 200, 0.0};
  const auto s = make_signal(kGamma * 5e-9, kOmegaRb, kBeta);
  const Mat2 r0 = evolve_with_decay(tr, s, {0.0}, t);
  const Mat2 rg = evolve_with_decay(tr, s, {g}, t);
  const double ratio = std::abs(rg(0, 1)) / std::abs(r0(0, 1)), want = std::exp(-g * t / 2);
  return {std::abs(ratio - want) < kTol, fmt("ratio %.10f vs exp(-gamma t/2) %.10f (diff %.2e < %.0e)", ratio, want,
                                            std::abs(ratio - want), kTol)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> all{c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12, c13, c14};
  std::vector<int> pick;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(all.size())) {
      std::fprintf(stderr, "unknown criterion %s\n", argv[i]);
      return 2;
    }
    pick.push_back(k);
  }
  if (pick.empty())
    for (int k = 1; k <= static_cast<int>(all.size()); ++k) pick.push_back(k);

  int failed = 0;
  for (int k : pick) {
    Outcome o;
    try {
      o = all[k - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2d: %s  %s\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
