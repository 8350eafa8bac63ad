// Copyright 2026 The cfq Authors. All Rights Reserved.
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

namespace cfq {

// Base of every error the library throws. The CLI maps the concrete
// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameter values (block length out of range, rank 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Operand shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated binary / JSON input.
class FormatError : public Error {
 public:
  using Error::Error;
};

// File system failures (missing file, unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, zero-norm references, 64-bit count overflow.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfq
