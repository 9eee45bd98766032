// Copyright 2026 The scalefuse Authors. All Rights Reserved.
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

namespace scalefuse {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Operand shapes do not conform.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Input contained NaN or Inf where finite values are required.
class InvalidValueError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Bad model, task or experiment configuration. CLI exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Problems with dataset contents or files. CLI exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  IoError(const std::string& path, const std::string& what)
      : DataError(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class ManifestParseError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class NonFiniteDataError : public DataError {
 public:
  using DataError::DataError;
};

class StratificationError : public DataError {
 public:
  using DataError::DataError;
};

// Training produced non-finite values. CLI exit code 3.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace scalefuse
