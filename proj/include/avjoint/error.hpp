// Copyright 2026 The avjoint Authors
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

#ifndef AVJOINT_ERROR_HPP_
#define AVJOINT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace avjoint {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed data that violates an operation precondition.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// A configuration object cannot describe a realizable setup.
class InvalidConfigError : public Error {
 public:
  using Error::Error;
};

// On-disk data is malformed or inconsistent with its manifest.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or inconsistent numeric state.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Label sequence has no valid alignment for the given frame count.
class InfeasibleAlignmentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace avjoint

#endif  // AVJOINT_ERROR_HPP_
