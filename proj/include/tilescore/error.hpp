// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tilescore {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid geometry (zero-area box, negative coordinate, box outside its tile).
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value (threshold out of range, bad grid, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input row. Carries the 1-based line number (header is line 1).
class ParseError : public Error {
 public:
  ParseError(std::string reason, std::size_t line)
      : Error(reason + ", line " + std::to_string(line)), reason_(std::move(reason)), line_(line) {}

  const std::string& reason() const noexcept { return reason_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string reason_;
  std::size_t line_;
};

}  // namespace tilescore
