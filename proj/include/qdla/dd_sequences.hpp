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

#include <vector>

namespace qdla {

enum class SeqKind { PDD, CP };

const char* to_string(SeqKind kind);

// n pulse intervals of length tau_m, t_n = n tau_m.
// PDD: n-1 pulses at j tau_m. CP: n pulses at (j - 1/2) tau_m.
// pulse_width == 0 means ideal delta pulses, otherwise square pulses of
// that width centred on the same positions.
struct PulseTrain {
  SeqKind kind = SeqKind::PDD;
  double tau_m = 1.0;
  int n = 2;
  double pulse_width = 0.0;

  bool is_delta() const { return pulse_width == 0.0; }
  double t_n() const { return n * tau_m; }
  int pulse_count() const { return kind == SeqKind::PDD ? n - 1 : n; }
  double center(int j) const;  // j = 1 .. pulse_count()
};

void validate(const PulseTrain& train);

std::vector<double> pulse_centers(const PulseTrain& train);

// (-1)^(pulse centres <= t); delta trains only
int modulation_h(const PulseTrain& train, double t);

// integrated pulse area up to t
double alpha(const PulseTrain& train, double t);

// |int_0^{t_n} h(t) e^{i omega t} dt|^2, exact per constant-h segment
double filter_function(const PulseTrain& train, double omega);

}  // namespace qdla
