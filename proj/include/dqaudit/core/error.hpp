/*
 * Copyright 2026 The dqaudit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dqaudit {

enum class ErrorKind {
  kUsage,
  kParse,
  kFormat,
  kData,
  kConflict,
  kContract,
  kNumeric,
  kUndefinedMetric,
  kCalibration,
  kPlacement,
  kTie,
};

inline const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kData: return "data";
    case ErrorKind::kConflict: return "conflict";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kUndefinedMetric: return "undefined-metric";
    case ErrorKind::kCalibration: return "calibration";
    case ErrorKind::kPlacement: return "placement";
    case ErrorKind::kTie: return "tie";
  }
  return "unknown";
}

// Every failure raised by the library. The kind decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ErrorKindName(kind)) + " error: " +
                           message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorKind::kParse,
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class NumericError : public Error {
 public:
  NumericError(std::size_t step, const std::string& message)
      : Error(ErrorKind::kNumeric,
              "step " + std::to_string(step) + ": " + message),
        step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Raised when no bin satisfies the threshold rule; carries the per-bin
// positive fractions (NaN for bins without samples).
class CalibrationError : public Error {
 public:
  CalibrationError(std::vector<double> fractions, const std::string& message)
      : Error(ErrorKind::kCalibration, message),
        fractions_(std::move(fractions)) {}

  const std::vector<double>& fractions() const { return fractions_; }

 private:
  std::vector<double> fractions_;
};

inline void Require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

// CLI exit code: 1 usage, 3 numeric, 2 for every other data/contract failure.
inline int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return 1;
    case ErrorKind::kNumeric: return 3;
    default: return 2;
  }
}

}  // namespace dqaudit
