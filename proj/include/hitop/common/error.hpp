#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hitop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (shape mismatch, empty input, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input document failed validation; `field()` names the offending path.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Finite element analysis could not be carried out (e.g. singular stiffness).
class AnalysisError : public Error {
 public:
  using Error::Error;
};

/// Skeleton traversal left pixels of a section unexplored.
class TraversalError : public Error {
 public:
  using Error::Error;
};

class IngestError : public Error {
 public:
  using Error::Error;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(int epoch, const std::string& message)
      : Error("epoch " + std::to_string(epoch) + ": " + message), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Weight or state file could not be read back.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Stored tensor shapes disagree with the requested configuration.
class ShapeError : public LoadError {
 public:
  using LoadError::LoadError;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

/// A required collaborator (model, file) is unavailable.
class DependencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace hitop
