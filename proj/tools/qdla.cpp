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

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qdla/errors.hpp"
#include "qdla/experiment_harness.hpp"

namespace {

constexpr int kConfigError = 2, kNoLock = 3, kNumerical = 4;

nlohmann::json load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw qdla::InputError("cannot open config " + path);
  try {
    return nlohmann::json::parse(f, nullptr, true, true);  // comments allowed
  } catch (const nlohmann::json::parse_error& e) {
    throw qdla::InputError("config " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdla: double lock-in simulations with CSV/JSON output"};
  std::string experiment, config, out = "out";
  std::uint64_t seed = 0;
  int averages = 0;
  app.add_option("experiment,--experiment", experiment,
                 "scan-weak, scan-strong, cpt-weak, cpt-strong, classical, filter-function, "
                 "robustness-pulse, robustness-noise, mains-noise, decay or cpt-prep");
  app.add_option("--config", config, "JSON config file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "master seed, overrides the config");
  auto* avg_opt = app.add_option("--averages", averages, "noise realizations per point")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    qdla::Overrides ov;
    if (!experiment.empty()) ov.experiment = experiment;
    if (*seed_opt) ov.seed = seed;
    if (*avg_opt) ov.averages = averages;
    const auto b = qdla::run_experiment(load_config(config), ov);
    qdla::write_bundle(b, out);
    if (b.no_lock) throw qdla::NoLockError(*b.no_lock);
    std::cout << b.estimates.dump(2) << "\n";
    return 0;
  } catch (const qdla::InputError& e) {
    std::cerr << "qdla: config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const qdla::NoLockError& e) {
    std::cerr << "qdla: no lock-in: " << e.what() << "\n";
    return kNoLock;
  } catch (const qdla::NumericalError& e) {
    std::cerr << "qdla: numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
}
