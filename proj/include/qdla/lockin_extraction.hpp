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
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace qdla {

enum class ScanAxis { TauM, N };
enum class Regime { WeakPup, StrongPz };

const char* to_string(Regime r);

struct MeasurementRecord {
  ScanAxis axis = ScanAxis::TauM;
  std::vector<double> abscissa;  // tau_m in seconds, or n
  std::vector<double> p_pdd;
  std::vector<double> p_cp;
  Regime regime = Regime::WeakPup;
};

void validate(const MeasurementRecord& rec);

// P_up^PDD + P_up^CP
std::vector<double> weak_combined(const MeasurementRecord& rec);
// P_z^PDD + P_z^CP
std::vector<double> strong_combined(const MeasurementRecord& rec);

// (A/omega)^2 [sin(n u/2) / sin(u/2)]^2 with u = omega tau_m - pi
double weak_sum_model(double A, double omega, int n, double tau_m);

struct WeakLock {
  std::size_t index = 0;
  double tau_hat = 0.0;
  double symmetry_score = -1.0;
  int lobe_points = 0;
  bool accepted = false;
};

// argmax of the curve and the Pearson correlation with its mirror image
// about the argmax, over the widest window the grid allows
WeakLock locate_lock_in_weak(std::span<const double> tau_grid, std::span<const double> curve,
                             double min_score = 0.99, int min_lobe_points = 8);

struct WeakFit {
  double A_hat = 0.0;
  double omega_hat = 0.0;
  double beta_hat_abs = 0.0;
  double rms_residual = 0.0;
};

// least squares of weak_sum_model over the whole grid, then |beta| from the
// two channel phases at the lock-in index
WeakFit fit_weak(const MeasurementRecord& rec, int n, const WeakLock& lock);

// F_k = sum over n = 2, 4, ..., n_m of x_n exp(-i 2 pi n k / n_m), k = 0 .. n_m/2 - 1
struct Spectrum {
  std::vector<std::complex<double>> F;  // indexed by bin k
  int n_m = 0;
  int excluded_low_bins = 2;
  int bins() const { return static_cast<int>(F.size()); }
  // per-n rate of bin k (rad per unit n)
  double rate_of_bin(double k) const;
};

// series[i] holds the sample at n = 2 (i + 1)
Spectrum fft_spectrum(std::span<const double> series, int excluded_low_bins = 2);
Spectrum fft_spectrum(std::span<const std::complex<double>> series, int excluded_low_bins = 2);

// sum |F|^4 / (sum |F|^2)^2 over the retained bins; 0 if they are all zero
double ipr(const Spectrum& spec);

struct StrongLock {
  std::size_t index = 0;
  double tau_hat = 0.0;
  double ipr_max = 0.0;
  double ipr_min = 0.0;
  std::optional<double> shift_D;  // tau_hat - tau_true
};

StrongLock locate_lock_in_strong(std::span<const double> tau_grid, std::span<const double> ipr_curve,
                                 std::optional<double> tau_true = std::nullopt,
                                 double min_contrast = 0.02);

struct ChannelPeak {
  double k_star = 0.0;     // interpolated bin, 0 when the channel is flat
  double rate = 0.0;       // per-n phase rate
  double magnitude = 0.0;  // |F| at the peak bin
};

// strongest retained bin in the lower half of the spectrum, refined by a
// three-point parabola on |F|
ChannelPeak channel_peak(const Spectrum& spec, double flat_threshold = 1e-3);

struct StrongFit {
  double A_hat = 0.0;
  double beta_hat_abs = 0.0;
  double omega_fft_pdd = 0.0;
  double omega_fft_cp = 0.0;
};

StrongFit extract_from_fft_frequencies(double omega_fft_pdd, double omega_fft_cp);
StrongFit extract_A_beta_strong(const Spectrum& spec_pdd, const Spectrum& spec_cp, double omega);

}  // namespace qdla
