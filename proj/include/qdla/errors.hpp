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

#include <stdexcept>
#include <string>

namespace qdla {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// bad arguments or configuration (exit code 2)
class InputError : public Error {
 public:
  using Error::Error;
};
class ResolutionError : public InputError {
 public:
  using InputError::InputError;
};

// lock-in point could not be established (exit code 3)
class NoLockError : public Error {
 public:
  using Error::Error;
};

// numerical failures (exit code 4)
class NumericalError : public Error {
 public:
  using Error::Error;
};
class IntegrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};
class EstimationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};
class AliasingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};
class SingularConfigurationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace qdla
