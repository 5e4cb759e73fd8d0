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

#include "qdla/experiment_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <boost/math/special_functions/bessel.hpp>

#include "qdla/classical_reference.hpp"
#include "qdla/dd_sequences.hpp"
#include "qdla/errors.hpp"
#include "qdla/spin_engine.hpp"

namespace qdla {

namespace {

using json = nlohmann::json;
constexpr double kPi = std::numbers::pi;
constexpr const char* kVersion = "0.1.0";

// Each index writes only its own output slot, so results do not depend on
// scheduling. The first exception is rethrown on the calling thread.
template <class F>
void parallel_for(std::size_t count, F&& body) {
  const std::size_t workers =
      std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; !failed && (i = next++) < count;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lk(m);
          if (!err) err = std::current_exception();
          failed = true;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

Mat2 phase_unitary(double phi) {
  Mat2 U = Mat2::Zero();
  U(0, 0) = std::polar(1.0, -0.5 * phi);
  U(1, 1) = std::polar(1.0, 0.5 * phi);
  return U;
}

struct ChannelUnitaries {
  std::vector<Mat2> pdd, cp;
};

// Both channels see the same field, so they share one noise realization.
ChannelUnitaries channel_unitaries(const ScanSpec& s, double tau_m, const std::vector<int>& ns,
                                   std::uint64_t seed) {
  SignalTrace trace;
  const SignalTrace* noise = nullptr;
  if (!is_silent(s.noise)) {
    const auto knots = required_knots(tau_m, s.pulse_width, ns.back(), s.noise);
    trace = sample_noise(s.noise, knots, seed);
    noise = &trace;
  }
  const double cp_sign = s.platform == Platform::CPT && s.strict_signs ? -1.0 : 1.0;
  ChannelUnitaries out;
  if (s.pulse_width == 0.0) {
    for (double phi : phase_series_delta(SeqKind::PDD, tau_m, ns, s.signal, noise))
      out.pdd.push_back(phase_unitary(phi));
    for (double phi : phase_series_delta(SeqKind::CP, tau_m, ns, s.signal, noise, cp_sign))
      out.cp.push_back(phase_unitary(phi));
    return out;
  }
  PropagateOptions o{s.tol, true, 1.0};
  if (ns.size() == 1) {
    out.pdd.push_back(propagator_numeric({SeqKind::PDD, tau_m, ns[0], s.pulse_width}, s.signal, noise, o));
    o.coupling_sign = cp_sign;
    out.cp.push_back(propagator_numeric({SeqKind::CP, tau_m, ns[0], s.pulse_width}, s.signal, noise, o));
    return out;
  }
  out.pdd = propagator_series(SeqKind::PDD, tau_m, s.pulse_width, ns, s.signal, noise, o);
  o.coupling_sign = cp_sign;
  out.cp = propagator_series(SeqKind::CP, tau_m, s.pulse_width, ns, s.signal, noise, o);
  return out;
}

// Readout of one (PDD, CP) unitary pair.
struct Readout {
  double p_pdd = 0.0, p_cp = 0.0;  // P_up per channel
  double normalized = 0.0;         // CPT: rho55 / a with both channels active
};

struct CptContext {
  Preparation prep;
  DetectionMap detect;
  explicit CptContext(const CPTParams& p) : prep(prepare_dark_states(p)), detect(p) {}
};

Readout read_pair(const CptContext* cpt, const Mat2& Up, const Mat2& Uc) {
  Readout r;
  if (!cpt) {
    r.p_pdd = readout_p_up(apply_unitary(Up, QubitState{}));
    r.p_cp = readout_p_up(apply_unitary(Uc, QubitState{}));
    r.normalized = 0.5 * (r.p_pdd + r.p_cp);
    return r;
  }
  const Mat2 I = Mat2::Identity();
  // single-block runs give each channel; a dark block contributes nothing
  r.p_pdd = 2.0 * cpt->detect.detect(apply_block_unitaries(cpt->prep.rho, Up, I)).normalized;
  r.p_cp = 2.0 * cpt->detect.detect(apply_block_unitaries(cpt->prep.rho, I, Uc)).normalized;
  r.normalized = cpt->detect.detect(apply_block_unitaries(cpt->prep.rho, Up, Uc)).normalized;
  return r;
}

int realizations(const ScanSpec& s) { return is_silent(s.noise) ? 1 : s.averages; }

void validate_spec(const ScanSpec& s) {
  if (s.tau_grid.size() < 3) throw InputError("grid: needs at least 3 points");
  for (std::size_t i = 1; i < s.tau_grid.size(); ++i)
    if (!(s.tau_grid[i] > s.tau_grid[i - 1])) throw InputError("grid: tau values must increase");
  if (!(s.tau_grid.front() > 0.0)) throw InputError("grid: tau values must be > 0");
  if (s.averages < 1) throw InputError("averages: must be >= 1");
  validate(s.noise);
  if (s.platform == Platform::CPT) validate(s.cpt);
}

std::unique_ptr<CptContext> make_cpt(const ScanSpec& s) {
  return s.platform == Platform::CPT ? std::make_unique<CptContext>(s.cpt) : nullptr;
}

}  // namespace

std::vector<double> tau_grid_around(double tau, double rel_span, int points) {
  if (!(tau > 0.0)) throw InputError("grid: tau must be > 0");
  if (!(rel_span > 0.0 && rel_span < 1.0)) throw InputError("grid.rel_span: must be in (0, 1)");
  if (points < 3) throw InputError("grid.points: must be >= 3");
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = tau * (1.0 + rel_span * (2.0 * i / (points - 1) - 1.0));
  return g;
}

WeakScanResult run_weak_scan(const ScanSpec& s, WeakScanResult* partial, double min_score) {
  validate_spec(s);
  if (s.n < 1) throw InputError("sequence.n: must be >= 1");
  const auto cpt = make_cpt(s);
  const std::size_t G = s.tau_grid.size();
  const int R = realizations(s);

  WeakScanResult out;
  out.record.axis = ScanAxis::TauM;
  out.record.regime = Regime::WeakPup;
  out.record.abscissa = s.tau_grid;
  out.record.p_pdd.assign(G, 0.0);
  out.record.p_cp.assign(G, 0.0);
  out.p_sum.assign(G, 0.0);
  out.rho55_normalized.assign(G, 0.0);

  parallel_for(G, [&](std::size_t i) {
    for (int r = 0; r < R; ++r) {
      const auto U = channel_unitaries(s, s.tau_grid[i], {s.n}, split_seed(s.seed, i, r));
      const auto rd = read_pair(cpt.get(), U.pdd[0], U.cp[0]);
      out.record.p_pdd[i] += rd.p_pdd / R;
      out.record.p_cp[i] += rd.p_cp / R;
      out.rho55_normalized[i] += rd.normalized / R;
    }
  });
  for (std::size_t i = 0; i < G; ++i)
    out.p_sum[i] = cpt ? 2.0 * out.rho55_normalized[i] : out.record.p_pdd[i] + out.record.p_cp[i];
  if (!cpt) out.rho55_normalized.clear();

  try {
    out.lock = locate_lock_in_weak(s.tau_grid, out.p_sum, min_score);
  } catch (const ResolutionError& e) {
    // with noise a short main lobe is a property of the data, not the grid
    if (is_silent(s.noise)) throw;
    if (partial) *partial = out;
    throw NoLockError(std::string("weak lock-in rejected: ") + e.what());
  }
  if (!out.lock.accepted) {
    if (partial) *partial = out;
    throw NoLockError("weak lock-in rejected: symmetry score " + format_number(out.lock.symmetry_score) +
                      " below " + format_number(min_score));
  }
  out.fit = fit_weak(out.record, s.n, out.lock);
  return out;
}

StrongScanResult run_strong_scan(const ScanSpec& s) {
  validate_spec(s);
  if (s.n_m < 8 || s.n_m % 2) throw InputError("sequence.n_m: must be even and >= 8");
  const auto cpt = make_cpt(s);
  const std::size_t G = s.tau_grid.size();
  const int R = realizations(s);
  std::vector<int> ns;
  for (int n = 2; n <= s.n_m; n += 2) ns.push_back(n);
  const std::size_t M = ns.size();

  // per grid point: channel P_z series and the combined series
  struct Series {
    std::vector<double> pdd, cp, sum, normalized;
  };
  std::vector<Series> all(G);
  std::vector<double> ipr_curve(G, 0.0);

  parallel_for(G, [&](std::size_t i) {
    Series& sr = all[i];
    sr.pdd.assign(M, 0.0);
    sr.cp.assign(M, 0.0);
    sr.normalized.assign(M, 0.0);
    for (int r = 0; r < R; ++r) {
      const auto U = channel_unitaries(s, s.tau_grid[i], ns, split_seed(s.seed, i, r));
      for (std::size_t k = 0; k < M; ++k) {
        const auto rd = read_pair(cpt.get(), U.pdd[k], U.cp[k]);
        sr.pdd[k] += (2.0 * rd.p_pdd - 1.0) / R;
        sr.cp[k] += (2.0 * rd.p_cp - 1.0) / R;
        sr.normalized[k] += rd.normalized / R;
      }
    }
    sr.sum.resize(M);
    for (std::size_t k = 0; k < M; ++k) sr.sum[k] = sr.pdd[k] + sr.cp[k];
    ipr_curve[i] = cpt ? ipr(fft_spectrum(tilde_rho55(sr.normalized))) : ipr(fft_spectrum(sr.sum));
  });

  StrongScanResult out;
  out.ipr = ipr_curve;
  out.ns = ns;
  out.lock = locate_lock_in_strong(s.tau_grid, ipr_curve, s.signal.half_period());
  Series& at = all[out.lock.index];
  out.pz_pdd = at.pdd;
  out.pz_cp = at.cp;
  out.pz_sum = at.sum;
  if (cpt) {
    out.rho55_normalized = at.normalized;
    out.rho55_tilde = tilde_rho55(at.normalized);
    out.spec_sum = fft_spectrum(out.rho55_tilde);
  } else {
    out.spec_sum = fft_spectrum(out.pz_sum);
  }
  out.spec_pdd = fft_spectrum(out.pz_pdd);
  out.spec_cp = fft_spectrum(out.pz_cp);
  out.peak_pdd = channel_peak(out.spec_pdd);
  out.peak_cp = channel_peak(out.spec_cp);
  out.fit = extract_A_beta_strong(out.spec_pdd, out.spec_cp, kPi / out.lock.tau_hat);
  return out;
}

namespace {

// noise phase amplitude of one channel for a unit-phase mains tone
double mains_amplitude(SeqKind kind, double C_n, double u) {
  return kind == SeqKind::PDD ? std::abs(C_n * std::cos(0.5 * u))
                              : std::abs(C_n * (1.0 + std::sin(0.5 * u)));
}

}  // namespace

MainsCheck mains_average_check(const TargetSignal& sig, const Mains& mains, double tau_m, int n_m,
                               int draws, std::uint64_t seed) {
  validate(NoiseModel{mains});
  if (draws < 1) throw InputError("mains.draws: must be >= 1");
  if (n_m < 2 || n_m % 2) throw InputError("sequence.n_m: must be even and >= 2");
  std::vector<int> ns;
  for (int n = 2; n <= n_m; n += 2) ns.push_back(n);
  const std::size_t M = ns.size();

  Mains random_phase = mains;
  random_phase.phase_beta_n.reset();
  const auto knots = required_knots(tau_m, 0.0, n_m, NoiseModel{random_phase});

  std::vector<std::vector<double>> acc_p(draws), acc_c(draws);
  parallel_for(static_cast<std::size_t>(draws), [&](std::size_t d) {
    const auto tr = sample_noise(random_phase, knots, split_seed(seed, 0, d));
    const auto pp = phase_series_delta(SeqKind::PDD, tau_m, ns, sig, &tr);
    const auto pc = phase_series_delta(SeqKind::CP, tau_m, ns, sig, &tr);
    acc_p[d].resize(M);
    acc_c[d].resize(M);
    for (std::size_t k = 0; k < M; ++k) {
      acc_p[d][k] = std::cos(pp[k]);
      acc_c[d][k] = std::cos(pc[k]);
    }
  });

  MainsCheck out;
  const double w = mains.omega_ma;
  const double u = w * tau_m - kPi;
  const double Nabs = sig.amplitude_A * mains.amplitude_Nn;
  const double su = std::sin(0.5 * u);
  for (std::size_t k = 0; k < M; ++k) {
    const int n = ns[k];
    MainsRow row;
    row.n = n;
    // Dirichlet ratio, with its limit where the denominator vanishes
    const double dir = std::abs(su) > 1e-12 ? std::sin(0.5 * n * u) / su : n * std::cos(0.5 * n * u) / std::cos(0.5 * u);
    const double C_n = 2.0 * Nabs / w * dir;
    row.N_pdd = mains_amplitude(SeqKind::PDD, C_n, u);
    row.N_cp = mains_amplitude(SeqKind::CP, C_n, u);
    const double phi_p = phase_series_delta(SeqKind::PDD, tau_m, {n}, sig, nullptr)[0];
    const double phi_c = phase_series_delta(SeqKind::CP, tau_m, {n}, sig, nullptr)[0];
    row.cf_pdd = std::cos(phi_p) * boost::math::cyl_bessel_j(0, row.N_pdd);
    row.cf_cp = std::cos(phi_c) * boost::math::cyl_bessel_j(0, row.N_cp);
    for (int d = 0; d < draws; ++d) {
      row.mc_pdd += acc_p[d][k];
      row.mc_cp += acc_c[d][k];
    }
    row.mc_pdd /= draws;
    row.mc_cp /= draws;
    const double cf = row.cf_pdd + row.cf_cp, mc = row.mc_pdd + row.mc_cp;
    out.max_deviation = std::max(out.max_deviation, std::abs(mc - cf) / std::max(1.0, std::abs(cf)));
    out.rows.push_back(row);
  }
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

// ---- config access ----

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw InputError("config field '" + field + "': " + what);
}

const json* child(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

double num(const json& j, const char* key, double def, const std::string& path) {
  const json* v = child(j, key);
  if (!v) return def;
  if (!v->is_number()) bad(path + key, "expected a number");
  return v->get<double>();
}

double num_req(const json& j, const char* key, const std::string& path) {
  if (!child(j, key)) bad(path + key, "required");
  return num(j, key, 0.0, path);
}

long long integer(const json& j, const char* key, long long def, const std::string& path) {
  const json* v = child(j, key);
  if (!v) return def;
  if (!v->is_number_integer() && !v->is_number_unsigned()) bad(path + key, "expected an integer");
  return v->get<long long>();
}

std::string str(const json& j, const char* key, const std::string& def, const std::string& path) {
  const json* v = child(j, key);
  if (!v) return def;
  if (!v->is_string()) bad(path + key, "expected a string");
  return v->get<std::string>();
}

bool boolean(const json& j, const char* key, bool def, const std::string& path) {
  const json* v = child(j, key);
  if (!v) return def;
  if (!v->is_boolean()) bad(path + key, "expected true or false");
  return v->get<bool>();
}

const json& section(const json& cfg, const char* key) {
  static const json empty = json::object();
  const json* v = child(cfg, key);
  if (!v) return empty;
  if (!v->is_object()) bad(key, "expected an object");
  return *v;
}

std::vector<double> num_list(const json& j, const char* key, const std::string& path) {
  const json* v = child(j, key);
  if (!v) bad(path + key, "required");
  if (!v->is_array() || v->empty()) bad(path + key, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& x : *v) {
    if (!x.is_number()) bad(path + key, "expected a non-empty array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
      bad(path + it.key(), "unknown field");
  }
}

const std::vector<std::string> kExperiments = {
    "scan-weak", "scan-strong", "cpt-weak", "cpt-strong", "classical", "filter-function",
    "robustness-pulse", "robustness-noise", "mains-noise", "decay", "cpt-prep"};

struct Parsed {
  std::string experiment;
  ScanSpec spec;
  bool b0_given = false;
  std::string regime = "auto";
  double min_score = 0.99;
  json cfg;
};

CPTParams parse_cpt(const json& cfg) {
  const json& c = section(cfg, "cpt");
  only_keys(c, {"Gamma", "Omega", "delta1", "delta2", "Delta1", "Delta2", "gamma_g", "T_prep", "T_detect"},
            "cpt.");
  CPTParams p;
  p.Gamma = num(c, "Gamma", p.Gamma, "cpt.");
  p.Omega = num(c, "Omega", p.Omega, "cpt.");
  p.delta1 = num(c, "delta1", p.delta1, "cpt.");
  p.delta2 = num(c, "delta2", p.delta2, "cpt.");
  p.Delta1 = num(c, "Delta1", p.Delta1, "cpt.");
  p.Delta2 = num(c, "Delta2", p.Delta2, "cpt.");
  p.gamma_g = num(c, "gamma_g", p.gamma_g, "cpt.");
  p.T_prep = num(c, "T_prep", p.T_prep, "cpt.");
  p.T_detect = num(c, "T_detect", p.T_detect, "cpt.");
  try {
    validate(p);
  } catch (const InputError& e) {
    bad("cpt", e.what());
  }
  return p;
}

NoiseModel parse_noise(const json& cfg, double tau) {
  const json& j = section(cfg, "noise");
  const std::string type = str(j, "type", "none", "noise.");
  NoiseModel m;
  if (type == "none") {
    only_keys(j, {"type"}, "noise.");
    m = NoNoise{};
  } else if (type == "white") {
    only_keys(j, {"type", "sigma", "sample_dt"}, "noise.");
    WhiteGaussian w;
    w.sigma = num_req(j, "sigma", "noise.");
    w.sample_dt = num(j, "sample_dt", kDefaultSampleDtOverTau * tau, "noise.");
    if (!(w.sigma >= 0.0)) bad("noise.sigma", "must be >= 0");
    if (!(w.sample_dt > 0.0)) bad("noise.sample_dt", "must be > 0");
    m = w;
  } else if (type == "mains") {
    only_keys(j, {"type", "amplitude", "omega_ma", "phase"}, "noise.");
    Mains ma;
    ma.amplitude_Nn = num_req(j, "amplitude", "noise.");
    ma.omega_ma = num(j, "omega_ma", 2 * kPi * 50.0, "noise.");
    if (child(j, "phase")) ma.phase_beta_n = num(j, "phase", 0.0, "noise.");
    if (!(ma.amplitude_Nn >= 0.0)) bad("noise.amplitude", "must be >= 0");
    if (!(ma.omega_ma > 0.0)) bad("noise.omega_ma", "must be > 0");
    m = ma;
  } else {
    bad("noise.type", "expected none, white or mains");
  }
  return m;
}

Parsed parse(json cfg, const Overrides& ov) {
  if (!cfg.is_object()) throw InputError("config: expected an object at the top level");
  if (ov.experiment) cfg["experiment"] = *ov.experiment;
  if (ov.seed) cfg["seed"] = *ov.seed;
  if (ov.averages) cfg["averages"] = *ov.averages;
  only_keys(cfg,
            {"experiment", "seed", "averages", "platform", "regime", "signal", "sequence", "grid", "noise",
             "cpt", "lock", "classical", "filter", "robustness", "mains", "decay"},
            "");

  Parsed p;
  p.experiment = str(cfg, "experiment", "", "");
  if (std::find(kExperiments.begin(), kExperiments.end(), p.experiment) == kExperiments.end())
    bad("experiment", "unknown experiment '" + p.experiment + "'");
  ScanSpec& s = p.spec;

  const long long seed = integer(cfg, "seed", 1, "");
  if (seed < 0) bad("seed", "must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);
  const long long avg = integer(cfg, "averages", 1, "");
  if (avg < 1) bad("averages", "must be >= 1");
  s.averages = static_cast<int>(avg);

  const std::string platform = str(cfg, "platform", "qubit", "");
  if (platform != "qubit" && platform != "cpt") bad("platform", "expected qubit or cpt");
  s.platform = platform == "cpt" || p.experiment.rfind("cpt-", 0) == 0 ? Platform::CPT : Platform::Qubit;
  s.cpt = parse_cpt(cfg);

  p.regime = str(cfg, "regime", "auto", "");
  if (p.regime != "auto" && p.regime != "weak" && p.regime != "strong")
    bad("regime", "expected auto, weak or strong");

  const json& sg = section(cfg, "signal");
  only_keys(sg, {"A", "B0_tesla", "omega", "frequency_hz", "beta"}, "signal.");
  if (child(sg, "omega") && child(sg, "frequency_hz")) bad("signal.omega", "give omega or frequency_hz, not both");
  const double omega = child(sg, "frequency_hz") ? 2 * kPi * num(sg, "frequency_hz", 0.0, "signal.")
                                                 : num(sg, "omega", kPi, "signal.");
  if (!(omega > 0.0)) bad("signal.omega", "must be > 0");
  if (child(sg, "A") && child(sg, "B0_tesla")) bad("signal.A", "give A or B0_tesla, not both");
  double A = num(sg, "A", 0.0, "signal.");
  if (child(sg, "B0_tesla")) {
    p.b0_given = true;
    A = std::abs(s.cpt.gamma_g) * num(sg, "B0_tesla", 0.0, "signal.");
  }
  const double beta = num(sg, "beta", 0.0, "signal.");
  if (!(A >= 0.0)) bad("signal.A", "must be >= 0");
  if (!(beta >= -kPi && beta <= kPi)) bad("signal.beta", "must be in [-pi, pi]");
  s.signal = make_signal(A, omega, beta == kPi ? -kPi : beta);
  const double tau = s.signal.half_period();

  const json& sq = section(cfg, "sequence");
  only_keys(sq, {"pulse_width", "n", "n_m", "strict_signs"}, "sequence.");
  s.pulse_width = num(sq, "pulse_width", 0.0, "sequence.");
  if (!(s.pulse_width >= 0.0)) bad("sequence.pulse_width", "must be >= 0");
  s.n = static_cast<int>(integer(sq, "n", 100, "sequence."));
  s.n_m = static_cast<int>(integer(sq, "n_m", 400, "sequence."));
  if (s.n < 1) bad("sequence.n", "must be >= 1");
  if (s.n_m < 8 || s.n_m % 2) bad("sequence.n_m", "must be even and >= 8");
  s.strict_signs = boolean(sq, "strict_signs", false, "sequence.");

  const json& gr = section(cfg, "grid");
  only_keys(gr, {"rel_span", "points", "tau_min", "tau_max", "step"}, "grid.");
  if (child(gr, "tau_min") || child(gr, "tau_max") || child(gr, "step")) {
    const double lo = num_req(gr, "tau_min", "grid."), hi = num_req(gr, "tau_max", "grid.");
    const double step = num_req(gr, "step", "grid.");
    if (!(lo > 0.0)) bad("grid.tau_min", "must be > 0");
    if (!(hi > lo)) bad("grid.tau_max", "must exceed tau_min");
    if (!(step > 0.0)) bad("grid.step", "must be > 0");
    const long long count = std::llround((hi - lo) / step);
    if (count < 2 || count > 100000) bad("grid.step", "gives an unusable number of points");
    for (long long i = 0; i <= count; ++i) s.tau_grid.push_back(lo + i * step);
  } else {
    const double span = num(gr, "rel_span", 0.05, "grid.");
    const long long pts = integer(gr, "points", 201, "grid.");
    if (!(span > 0.0 && span < 1.0)) bad("grid.rel_span", "must be in (0, 1)");
    if (pts < 3 || pts > 100000) bad("grid.points", "must be in [3, 100000]");
    s.tau_grid = tau_grid_around(tau, span, static_cast<int>(pts));
  }
  if (s.pulse_width > 0.0 && s.pulse_width >= s.tau_grid.front())
    bad("sequence.pulse_width", "must be shorter than the smallest tau_m");

  s.noise = parse_noise(cfg, tau);

  const json& lk = section(cfg, "lock");
  only_keys(lk, {"min_score"}, "lock.");
  p.min_score = num(lk, "min_score", 0.99, "lock.");
  if (!(p.min_score > -1.0 && p.min_score <= 1.0)) bad("lock.min_score", "must be in (-1, 1]");

  p.cfg = cfg;
  return p;
}

// ---- output assembly ----

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& cols) {
  std::ostringstream os;
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << '\n';
  const std::size_t rows = cols.empty() ? 0 : cols[0].size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << format_number(cols[c][r]);
    os << '\n';
  }
  return os.str();
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json blank_estimates(const Parsed& p) {
  return json{{"omega_hat_rad_s", nullptr}, {"a_hat_rad_s", nullptr},   {"b0_hat_tesla", nullptr},
              {"beta_hat_abs_rad", nullptr}, {"ipr_max", nullptr},      {"shift_d_seconds", nullptr},
              {"regime", nullptr},           {"seed", p.spec.seed}};
}

void set_amplitude(json& e, const Parsed& p, double A_hat) {
  e["a_hat_rad_s"] = jnum(A_hat);
  if (p.b0_given || p.spec.platform == Platform::CPT)
    e["b0_hat_tesla"] = jnum(A_hat / std::abs(p.spec.cpt.gamma_g));
}

Regime pick_regime(const Parsed& p) {
  if (p.regime == "weak") return Regime::WeakPup;
  if (p.regime == "strong") return Regime::StrongPz;
  const auto& sg = p.spec.signal;
  return sg.amplitude_A / sg.omega < 1.0 / (2.0 * p.spec.n) ? Regime::WeakPup : Regime::StrongPz;
}

std::vector<double> iota_doubles(const std::vector<int>& v) { return {v.begin(), v.end()}; }

void weak_bundle(const Parsed& p, const WeakScanResult& w, ResultBundle& b) {
  std::vector<std::string> head{"tau_m_seconds", "p_pdd", "p_cp", "p_sum"};
  std::vector<std::vector<double>> cols{w.record.abscissa, w.record.p_pdd, w.record.p_cp, w.p_sum};
  if (!w.rho55_normalized.empty()) {
    head.push_back("rho55_normalized");
    cols.push_back(w.rho55_normalized);
    // small-signal predictor of the normalized population
    std::vector<double> pred;
    for (double t : w.record.abscissa)
      pred.push_back(0.5 * weak_sum_model(p.spec.signal.amplitude_A, p.spec.signal.omega, p.spec.n, t));
    head.push_back("rho55_predicted");
    cols.push_back(pred);
  }
  b.curves_csv = csv(head, cols);
  auto& e = b.estimates;
  e["regime"] = to_string(Regime::WeakPup);
  e["tau_hat_seconds"] = w.lock.tau_hat;
  e["symmetry_score"] = jnum(w.lock.symmetry_score);
  e["lobe_points"] = w.lock.lobe_points;
  e["lock_accepted"] = w.lock.accepted;
  e["shift_d_seconds"] = w.lock.tau_hat - p.spec.signal.half_period();
  if (w.fit) {
    e["omega_hat_rad_s"] = w.fit->omega_hat;
    set_amplitude(e, p, w.fit->A_hat);
    e["beta_hat_abs_rad"] = w.fit->beta_hat_abs;
    e["fit_rms_residual"] = w.fit->rms_residual;
  }
}

void strong_bundle(const Parsed& p, const StrongScanResult& r, ResultBundle& b) {
  b.curves_csv = csv({"tau_m_seconds", "ipr"}, {p.spec.tau_grid, r.ipr});
  std::vector<std::string> head{"n", "pz_pdd", "pz_cp", "pz_sum"};
  std::vector<std::vector<double>> cols{iota_doubles(r.ns), r.pz_pdd, r.pz_cp, r.pz_sum};
  if (!r.rho55_normalized.empty()) {
    head.insert(head.end(), {"rho55_normalized", "rho55_tilde"});
    cols.push_back(r.rho55_normalized);
    cols.push_back(r.rho55_tilde);
  }
  b.series_csv = csv(head, cols);
  std::vector<double> k, rate, fs, fp, fc;
  for (int i = 0; i < r.spec_sum.bins(); ++i) {
    k.push_back(i);
    rate.push_back(r.spec_sum.rate_of_bin(i));
    fs.push_back(std::abs(r.spec_sum.F[i]));
    fp.push_back(std::abs(r.spec_pdd.F[i]));
    fc.push_back(std::abs(r.spec_cp.F[i]));
  }
  b.spectrum_csv = csv({"k", "omega_fft_over_omega", "abs_f_sum", "abs_f_pdd", "abs_f_cp"}, {k, rate, fs, fp, fc});
  auto& e = b.estimates;
  e["regime"] = to_string(Regime::StrongPz);
  e["tau_hat_seconds"] = r.lock.tau_hat;
  e["omega_hat_rad_s"] = kPi / r.lock.tau_hat;
  e["ipr_max"] = r.lock.ipr_max;
  e["shift_d_seconds"] = r.lock.shift_D ? jnum(*r.lock.shift_D) : json(nullptr);
  set_amplitude(e, p, r.fit.A_hat);
  e["beta_hat_abs_rad"] = r.fit.beta_hat_abs;
  e["omega_fft_pdd_rad_s"] = r.fit.omega_fft_pdd;
  e["omega_fft_cp_rad_s"] = r.fit.omega_fft_cp;
  e["peak_pdd_over_omega"] = r.peak_pdd.rate;
  e["peak_cp_over_omega"] = r.peak_cp.rate;
}

// one scan with the regime chosen from the config; writes into b
void run_scan(const Parsed& p, ResultBundle& b) {
  if (pick_regime(p) == Regime::WeakPup) {
    WeakScanResult partial;
    try {
      weak_bundle(p, run_weak_scan(p.spec, &partial, p.min_score), b);
    } catch (const NoLockError&) {
      weak_bundle(p, partial, b);  // keep the curves for diagnosis
      throw;
    }
  } else {
    strong_bundle(p, run_strong_scan(p.spec), b);
  }
}

void run_classical(const Parsed& p, ResultBundle& b) {
  const json& c = section(p.cfg, "classical");
  only_keys(c, {"periods", "omega_m", "rel_span", "points"}, "classical.");
  const auto& sg = p.spec.signal;
  const double periods = num(c, "periods", 100.0, "classical.");
  if (!(periods > 0.0)) bad("classical.periods", "must be > 0");
  const double T = periods * 2 * kPi / sg.omega;
  const double wm = num(c, "omega_m", sg.omega, "classical.");
  if (!(wm > 0.0)) bad("classical.omega_m", "must be > 0");
  const double span = num(c, "rel_span", 0.05, "classical.");
  const long long pts = integer(c, "points", 101, "classical.");
  if (!(span > 0.0 && span < 1.0)) bad("classical.rel_span", "must be in (0, 1)");
  if (pts < 3) bad("classical.points", "must be >= 3");

  std::vector<double> w, I, Q, A, B;
  for (long long i = 0; i < pts; ++i) {
    const double om = wm * (1.0 + span * (2.0 * i / (pts - 1) - 1.0));
    const auto iq = mix_and_integrate(sg, p.spec.noise, split_seed(p.spec.seed, i, 0), om, T);
    const auto est = extract_classical(iq);
    w.push_back(om);
    I.push_back(iq.I);
    Q.push_back(iq.Q);
    A.push_back(est.A_hat);
    B.push_back(est.beta_hat);
  }
  b.curves_csv = csv({"omega_m_rad_s", "i", "q", "a_hat_rad_s", "beta_hat_rad"}, {w, I, Q, A, B});
  const auto iq = mix_and_integrate(sg, p.spec.noise, split_seed(p.spec.seed, pts, 0), wm, T);
  const auto est = extract_classical(iq);
  auto& e = b.estimates;
  e["regime"] = "classical";
  e["omega_hat_rad_s"] = wm;
  set_amplitude(e, p, est.A_hat);
  e["beta_hat_abs_rad"] = std::abs(est.beta_hat);
  e["beta_hat_rad"] = est.beta_hat;
  e["short_window"] = iq.short_window;
}

void run_filter(const Parsed& p, ResultBundle& b) {
  const json& c = section(p.cfg, "filter");
  only_keys(c, {"tau_m", "n", "omega_max", "points"}, "filter.");
  const double tau_m = num(c, "tau_m", p.spec.signal.half_period(), "filter.");
  const int n = static_cast<int>(integer(c, "n", p.spec.n, "filter."));
  if (!(tau_m > 0.0)) bad("filter.tau_m", "must be > 0");
  if (n < 1) bad("filter.n", "must be >= 1");
  const double wmax = num(c, "omega_max", 8 * kPi / tau_m, "filter.");
  const long long pts = integer(c, "points", 4001, "filter.");
  if (!(wmax > 0.0)) bad("filter.omega_max", "must be > 0");
  if (pts < 3) bad("filter.points", "must be >= 3");
  const PulseTrain pdd{SeqKind::PDD, tau_m, n, 0.0}, cp{SeqKind::CP, tau_m, n, 0.0};
  std::vector<double> w, fp, fc;
  for (long long i = 1; i <= pts; ++i) {
    const double om = wmax * i / pts;
    w.push_back(om);
    fp.push_back(filter_function(pdd, om));
    fc.push_back(filter_function(cp, om));
  }
  b.curves_csv = csv({"omega_rad_s", "filter_pdd", "filter_cp"}, {w, fp, fc});
  const double w1 = kPi / tau_m, tn = n * tau_m;
  auto& e = b.estimates;
  e["regime"] = "filter";
  e["filter_cp_at_pi_over_tau_m"] = filter_function(cp, w1);
  e["filter_pdd_at_pi_over_tau_m"] = filter_function(pdd, w1);
  e["filter_cp_at_2pi_over_tau_m"] = filter_function(cp, 2 * w1);
  e["peak_prediction"] = 4 * tn * tn / (kPi * kPi);
}

void run_robustness(const Parsed& p, ResultBundle& b, bool pulses) {
  const json& c = section(p.cfg, "robustness");
  only_keys(c, {"pulse_widths", "sigmas"}, "robustness.");
  const auto values = num_list(c, pulses ? "pulse_widths" : "sigmas", "robustness.");
  const auto& sg = p.spec.signal;
  const double tau = sg.half_period();
  const Regime regime = pick_regime(p);

  std::vector<double> x, locked, tau_hat, a_hat, beta_hat, dA, dB, ipr_max;
  json runs = json::array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    Parsed q = p;
    if (pulses) {
      if (!(values[i] >= 0.0 && values[i] < q.spec.tau_grid.front()))
        bad("robustness.pulse_widths", "each width must be in [0, smallest tau_m)");
      q.spec.pulse_width = values[i];
    } else {
      if (!(values[i] >= 0.0)) bad("robustness.sigmas", "must be >= 0");
      const auto* w = std::get_if<WhiteGaussian>(&p.spec.noise);
      q.spec.noise = WhiteGaussian{values[i], w ? w->sample_dt : kDefaultSampleDtOverTau * tau};
    }
    ResultBundle sub;
    sub.estimates = blank_estimates(q);
    bool ok = true;
    try {
      run_scan(q, sub);
    } catch (const NoLockError&) {
      ok = false;
    }
    const auto& e = sub.estimates;
    auto val = [&](const char* k) { return e.contains(k) && e[k].is_number() ? e[k].get<double>() : std::nan(""); };
    x.push_back(values[i]);
    locked.push_back(ok ? 1.0 : 0.0);
    tau_hat.push_back(val("tau_hat_seconds"));
    a_hat.push_back(val("a_hat_rad_s"));
    beta_hat.push_back(val("beta_hat_abs_rad"));
    dA.push_back((a_hat.back() - sg.amplitude_A) / sg.amplitude_A);
    dB.push_back(sg.beta != 0.0 ? (beta_hat.back() - std::abs(sg.beta)) / std::abs(sg.beta) : std::nan(""));
    ipr_max.push_back(val("ipr_max"));
    json run = e;
    run[pulses ? "pulse_width" : "sigma"] = values[i];
    runs.push_back(run);
    if (i == 0) b.series_csv = sub.curves_csv;  // reference curve
  }
  b.curves_csv = csv({pulses ? "pulse_width_seconds" : "sigma", "locked", "tau_hat_seconds", "a_hat_rad_s",
                      "beta_hat_abs_rad", "rel_dev_a", "rel_dev_beta", "ipr_max"},
                     {x, locked, tau_hat, a_hat, beta_hat, dA, dB, ipr_max});
  auto& e = b.estimates;
  e = runs.back();
  e.erase(pulses ? "pulse_width" : "sigma");
  e["regime"] = to_string(regime);
  e["runs"] = runs;
  e["seed"] = p.spec.seed;
}

void run_mains(const Parsed& p, ResultBundle& b) {
  const json& c = section(p.cfg, "mains");
  only_keys(c, {"draws", "tau_m"}, "mains.");
  const auto* m = std::get_if<Mains>(&p.spec.noise);
  if (!m) bad("noise.type", "mains-noise needs mains noise");
  const long long draws = integer(c, "draws", 10000, "mains.");
  if (draws < 1 || draws > 10000000) bad("mains.draws", "must be in [1, 1e7]");
  const double tau_m = num(c, "tau_m", p.spec.signal.half_period(), "mains.");
  if (!(tau_m > 0.0)) bad("mains.tau_m", "must be > 0");
  const auto chk = mains_average_check(p.spec.signal, *m, tau_m, p.spec.n_m, static_cast<int>(draws), p.spec.seed);
  std::vector<double> n, mp, cp_, mc, cc, Np, Nc;
  for (const auto& r : chk.rows) {
    n.push_back(r.n);
    mp.push_back(r.mc_pdd);
    cp_.push_back(r.cf_pdd);
    mc.push_back(r.mc_cp);
    cc.push_back(r.cf_cp);
    Np.push_back(r.N_pdd);
    Nc.push_back(r.N_cp);
  }
  b.curves_csv = csv({"n", "mc_cos_pdd", "cf_cos_pdd", "mc_cos_cp", "cf_cos_cp", "n_arg_pdd", "n_arg_cp"},
                     {n, mp, cp_, mc, cc, Np, Nc});
  auto& e = b.estimates;
  e["regime"] = "mains";
  e["max_deviation"] = chk.max_deviation;
  e["draws"] = draws;
}

void run_decay(const Parsed& p, ResultBundle& b) {
  const json& c = section(p.cfg, "decay");
  only_keys(c, {"gamma", "kind", "tau_m", "points"}, "decay.");
  const double gamma = num_req(c, "gamma", "decay.");
  if (!(gamma >= 0.0)) bad("decay.gamma", "must be >= 0");
  const std::string kind = str(c, "kind", "PDD", "decay.");
  if (kind != "PDD" && kind != "CP") bad("decay.kind", "expected PDD or CP");
  const double tau_m = num(c, "tau_m", p.spec.signal.half_period(), "decay.");
  if (!(tau_m > 0.0)) bad("decay.tau_m", "must be > 0");
  const long long pts = integer(c, "points", 101, "decay.");
  if (pts < 2) bad("decay.points", "must be >= 2");
  const PulseTrain tr{kind == "PDD" ? SeqKind::PDD : SeqKind::CP, tau_m, p.spec.n, 0.0};
  validate(tr);
  std::vector<double> t, ratio, expect, pup0, pupg;
  std::vector<double> times(pts);
  for (long long i = 0; i < pts; ++i) times[i] = tr.t_n() * i / (pts - 1);
  std::vector<Mat2> r0(pts), rg(pts);
  parallel_for(times.size(), [&](std::size_t i) {
    r0[i] = evolve_with_decay(tr, p.spec.signal, {0.0}, times[i], p.spec.tol);
    rg[i] = evolve_with_decay(tr, p.spec.signal, {gamma}, times[i], p.spec.tol);
  });
  for (long long i = 0; i < pts; ++i) {
    t.push_back(times[i]);
    ratio.push_back(std::abs(rg[i](0, 1)) / std::abs(r0[i](0, 1)));
    expect.push_back(std::exp(-0.5 * gamma * times[i]));
    // P_up for the state (|up> + |down>)/sqrt(2) read along x
    pup0.push_back(0.5 - r0[i](0, 1).real());
    pupg.push_back(0.5 - rg[i](0, 1).real());
  }
  b.curves_csv = csv({"t_seconds", "coherence_ratio", "exp_minus_gamma_t_over_2", "p_up_no_decay", "p_up_decay"},
                     {t, ratio, expect, pup0, pupg});
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(ratio[i] - expect[i]));
  auto& e = b.estimates;
  e["regime"] = "decay";
  e["max_ratio_error"] = worst;
}

void run_cpt_prep(const Parsed& p, ResultBundle& b) {
  const auto& cp = p.spec.cpt;
  const int pts = 41;
  std::vector<double> t(pts), fid(pts), pop5(pts);
  parallel_for(pts, [&](std::size_t i) {
    CPTParams q = cp;
    q.T_prep = cp.T_prep * i / (pts - 1);
    t[i] = q.T_prep;
    const Mat5 rho = i == 0 ? uniform_ground_mixture() : lindblad_evolve(uniform_ground_mixture(), q, q.T_prep, true);
    fid[i] = uhlmann_fidelity(rho, dark_state_pair());
    pop5[i] = rho(4, 4).real();
  });
  b.curves_csv = csv({"t_seconds", "dark_fidelity", "rho55"}, {t, fid, pop5});
  auto& e = b.estimates;
  e["regime"] = "cpt-prep";
  e["dark_fidelity"] = fid.back();
  e["detection_normalization"] = DetectionMap(cp).normalization();
}

}  // namespace

ResultBundle run_experiment(json config, const Overrides& ov) {
  Parsed p = parse(std::move(config), ov);
  ResultBundle b;
  b.estimates = blank_estimates(p);
  b.meta = json{{"tool", "qdla"}, {"version", kVersion}, {"seed", p.spec.seed}, {"config", p.cfg}};

  const std::string& x = p.experiment;
  if (x == "scan-weak" || x == "scan-strong" || x == "cpt-weak" || x == "cpt-strong") {
    Parsed q = p;
    if (p.regime == "auto" && (x == "scan-strong" || x == "cpt-strong") && pick_regime(p) == Regime::WeakPup)
      bad("regime", "signal is in the weak regime for sequence.n; set regime to strong to force it");
    try {
      run_scan(q, b);
    } catch (const NoLockError& e) {
      b.no_lock = e.what();
    }
  } else if (x == "classical") {
    run_classical(p, b);
  } else if (x == "filter-function") {
    run_filter(p, b);
  } else if (x == "robustness-pulse") {
    run_robustness(p, b, true);
  } else if (x == "robustness-noise") {
    run_robustness(p, b, false);
  } else if (x == "mains-noise") {
    run_mains(p, b);
  } else if (x == "decay") {
    run_decay(p, b);
  } else {
    run_cpt_prep(p, b);
  }
  return b;
}

void write_bundle(const ResultBundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw InputError(std::string("cannot write ") + name + " in " + dir);
    f << text;
  };
  put("curves.csv", b.curves_csv);
  if (!b.series_csv.empty()) put("series.csv", b.series_csv);
  if (!b.spectrum_csv.empty()) put("spectrum.csv", b.spectrum_csv);
  put("estimates.json", b.estimates.dump(2) + "\n");
  put("meta.json", b.meta.dump(2) + "\n");
}

}  // namespace qdla
