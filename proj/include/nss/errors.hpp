// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace nss {

/// Base of every error raised by the library. `kind()` is a stable,
/// machine-readable tag that the CLI forwards on its reason lines.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Argument outside the mathematical domain of an operation (e.g. alpha > 1).
struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

// Parameters that break a type invariant.
struct InvariantError : Error {
  explicit InvariantError(const std::string& what) : Error("invariant", what) {}
};

// Misuse of an API contract: shape mismatch, tape reuse, wrong split.
struct ContractError : Error {
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error("data", what) {}
};

// Non-finite loss or gradients during optimization.
struct TrainingError : Error {
  explicit TrainingError(const std::string& what) : Error("training", what) {}
};

struct ArchiveError : Error {
  explicit ArchiveError(const std::string& what) : Error("archive", what) {}
};

}  // namespace nss
