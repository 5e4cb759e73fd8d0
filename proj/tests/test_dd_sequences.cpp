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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "qdla/dd_sequences.hpp"
#include "qdla/errors.hpp"

using namespace qdla;

namespace {
PulseTrain train(SeqKind k, double tau_m, int n, double w = 0.0) { return {k, tau_m, n, w}; }
}  // namespace

TEST_CASE("pulse centres") {
  CHECK(pulse_centers(train(SeqKind::PDD, 1.0, 4)) == std::vector<double>{1, 2, 3});
  CHECK(pulse_centers(train(SeqKind::CP, 1.0, 4)) == std::vector<double>{0.5, 1.5, 2.5, 3.5});
  CHECK(pulse_centers(train(SeqKind::PDD, 2.0, 2)) == std::vector<double>{2});
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(validate(train(SeqKind::PDD, 1.0, 3)), InputError);
  CHECK_THROWS_AS(validate(train(SeqKind::PDD, 1.0, 0)), InputError);
  CHECK_THROWS_AS(validate(train(SeqKind::CP, -1.0, 2)), InputError);
  CHECK_THROWS_AS(validate(train(SeqKind::CP, 1.0, 2, 1.5)), InputError);
  CHECK_NOTHROW(validate(train(SeqKind::CP, 1.0, 2, 1.0)));
}

TEST_CASE("modulation examples") {
  auto p = train(SeqKind::PDD, 1.0, 4);
  auto c = train(SeqKind::CP, 1.0, 4);
  CHECK(modulation_h(p, 0.5) == 1);
  CHECK(modulation_h(p, 1.5) == -1);
  CHECK(modulation_h(c, 0.25) == 1);
  CHECK(modulation_h(c, 0.75) == -1);
  CHECK(modulation_h(p, 0.0) == 1);
  CHECK(modulation_h(c, 0.0) == 1);
}

TEST_CASE("alpha examples") {
  CHECK(alpha(train(SeqKind::PDD, 1.0, 4), 2.5) == doctest::Approx(2 * M_PI));
  CHECK(alpha(train(SeqKind::CP, 1.0, 4, 0.2), 0.5) == doctest::Approx(M_PI / 2));
  CHECK(alpha(train(SeqKind::CP, 1.0, 4, 0.2), 0.0) == 0.0);
  CHECK(alpha(train(SeqKind::PDD, 1.0, 4), 0.0) == 0.0);
  CHECK(alpha(train(SeqKind::CP, 1.0, 4, 0.2), 4.0) == doctest::Approx(4 * M_PI));
}

TEST_CASE("h equals cos(alpha) off the pulse centres") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (SeqKind k : {SeqKind::PDD, SeqKind::CP}) {
    auto tr = train(k, 0.7, 20);
    for (int i = 0; i < 2000; ++i) {
      double t = u(rng) * tr.t_n();
      CHECK(double(modulation_h(tr, t)) == std::cos(alpha(tr, t)));
    }
  }
}

TEST_CASE("filter function values") {
  auto c32 = train(SeqKind::CP, 1.0, 32);
  double f1 = filter_function(c32, M_PI);
  double tn = c32.t_n();
  CHECK(std::abs(f1 / (4 * tn * tn / (M_PI * M_PI)) - 1.0) < 0.05);
  // frozen from exact segment sums
  CHECK(f1 == doctest::Approx(415.0115681990153).epsilon(1e-12));
  CHECK(filter_function(c32, 3 * M_PI) == doctest::Approx(46.11239646655726).epsilon(1e-12));
  CHECK(filter_function(c32, 2 * M_PI) <= 1e-3 * f1);
  auto c64 = train(SeqKind::CP, 1.0, 64);
  CHECK(filter_function(c64, M_PI) / f1 == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("filter function: odd harmonics dominate, even ones vanish") {
  for (SeqKind kind : {SeqKind::PDD, SeqKind::CP}) {
    for (int n : {32, 64, 128}) {
      auto tr = train(kind, 1.0, n);
      double f1 = filter_function(tr, M_PI);
      for (int k = 1; k <= 7; ++k) {
        double fk = filter_function(tr, k * M_PI);
        if (k % 2 == 0) {
          CHECK(fk * 100.0 < f1);
        } else {
          // local maximum in omega
          double d = 0.2 * M_PI / n;
          CHECK(fk > filter_function(tr, k * M_PI - d));
          CHECK(fk > filter_function(tr, k * M_PI + d));
        }
      }
    }
  }
}

TEST_CASE("filter function is non-negative and finite at zero frequency") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (SeqKind kind : {SeqKind::PDD, SeqKind::CP}) {
    auto tr = train(kind, 1.0, 16);
    for (int i = 0; i < 500; ++i) CHECK(filter_function(tr, u(rng)) >= 0.0);
    // PDD h integrates to zero over an even number of intervals
    if (kind == SeqKind::PDD) CHECK(filter_function(tr, 0.0) < 1e-20);
  }
}
