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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdla/cpt_simulator.hpp"
#include "qdla/lockin_extraction.hpp"
#include "qdla/signal_models.hpp"

namespace qdla {

enum class Platform { Qubit, CPT };

struct ScanSpec {
  TargetSignal signal;
  Platform platform = Platform::Qubit;
  CPTParams cpt{};
  double pulse_width = 0.0;  // 0: delta pulses
  int n = 100;               // weak scans
  int n_m = 400;             // strong scans
  std::vector<double> tau_grid;
  NoiseModel noise = NoNoise{};
  int averages = 1;
  std::uint64_t seed = 1;
  bool strict_signs = false;
  OdeTolerance tol{};
};

std::vector<double> tau_grid_around(double tau, double rel_span, int points);

// white-noise cell default when the config leaves sample_dt out
constexpr double kDefaultSampleDtOverTau = 1e-4;

struct WeakScanResult {
  MeasurementRecord record;               // averaged; P_up per channel
  std::vector<double> p_sum;              // the measured combination
  std::vector<double> rho55_normalized;   // CPT only
  WeakLock lock;
  std::optional<WeakFit> fit;             // absent when the lock is rejected
};

// Throws NoLockError when the symmetry score is below threshold, after the
// record has been filled in (see `partial`).
WeakScanResult run_weak_scan(const ScanSpec& spec, WeakScanResult* partial = nullptr,
                             double min_score = 0.99);

struct StrongScanResult {
  std::vector<double> ipr;
  StrongLock lock;
  std::vector<int> ns;
  // series at the lock-in index
  std::vector<double> pz_pdd, pz_cp, pz_sum;
  std::vector<double> rho55_normalized, rho55_tilde;  // CPT only
  Spectrum spec_sum, spec_pdd, spec_cp;
  StrongFit fit;
  ChannelPeak peak_pdd, peak_cp;
};

StrongScanResult run_strong_scan(const ScanSpec& spec);

// Monte Carlo over the mains phase against cos(phi) J0(N)
struct MainsRow {
  int n = 0;
  double mc_pdd = 0.0, cf_pdd = 0.0, mc_cp = 0.0, cf_cp = 0.0;
  double N_pdd = 0.0, N_cp = 0.0;
};

struct MainsCheck {
  std::vector<MainsRow> rows;
  double max_deviation = 0.0;  // max |mc - cf| / max(1, |cf|)
};

MainsCheck mains_average_check(const TargetSignal& sig, const Mains& mains, double tau_m, int n_m,
                               int draws, std::uint64_t seed);

struct ResultBundle {
  std::string curves_csv;
  std::string series_csv;    // strong runs
  std::string spectrum_csv;  // strong runs
  nlohmann::json estimates;
  nlohmann::json meta;
  // set when a scan ran but the lock-in was rejected; curves are still filled
  std::optional<std::string> no_lock;
};

struct Overrides {
  std::optional<std::string> experiment;
  std::optional<std::uint64_t> seed;
  std::optional<int> averages;
};

// Validates the config (InputError naming the field) and runs it.
ResultBundle run_experiment(nlohmann::json config, const Overrides& ov = {});

void write_bundle(const ResultBundle& b, const std::string& dir);

std::string format_number(double v);

}  // namespace qdla
