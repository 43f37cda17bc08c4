// Copyright 2026 The AARQA Authors.
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

namespace aarqa {

// Base class for all library errors. The category string is stable and is
// what the command line tool prints as the machine-readable error kind.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

// Malformed input text (triple files, templates, datasets, configs).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message) : Error("parse", message) {}
};

// Input that parses but violates a contract (dangling ids, bad profile).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error("validation", message) {}
};

// Training or model configuration out of range.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

// Missing or unreadable files.
class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

// Incompatible tensor shapes inside the autodiff engine.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

// Non-finite loss during training.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& message)
      : Error("divergence", message) {}
};

}  // namespace aarqa
