// Copyright 2026 The longdoc Authors
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

#ifndef LONGDOC_ERRORS_HPP_
#define LONGDOC_ERRORS_HPP_

#include <stdexcept>
#include <string>

#include "longdoc/real.hpp"

namespace longdoc::inline LONGDOC_ABI {

// Every error raised by the library derives from Error. The three middle
// classes drive the CLI exit code: ConfigError -> usage (1), DataError ->
// data (2), NumericError -> numeric failure (3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Numerics.
class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DegenerateRowError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Encoder.
class TruncationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Tokenizer / decoding.
class RangeError : public DataError {
 public:
  using DataError::DataError;
};

// Corpus.
class EmptySelectionError : public DataError {
 public:
  using DataError::DataError;
};

// Checkpoint.
class VersionError : public DataError {
 public:
  using DataError::DataError;
};

class ChecksumError : public DataError {
 public:
  using DataError::DataError;
};

class TruncatedFileError : public DataError {
 public:
  using DataError::DataError;
};

class ConfigMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class ConversionError : public DataError {
 public:
  using DataError::DataError;
};

// Datasets / metrics.
class ParseError : public DataError {
 public:
  ParseError(const std::string& where, const std::string& what)
      : DataError(where + ": " + what) {}
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};

class UndefinedCorrelationError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Training.
class GridError : public Error {
 public:
  using Error::Error;
};

}  // namespace longdoc::inline LONGDOC_ABI

#endif  // LONGDOC_ERRORS_HPP_
