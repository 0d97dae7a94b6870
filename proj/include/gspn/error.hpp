#pragma once

#include <stdexcept>
#include <string>

namespace gspn {

// Every error raised by the library derives from Error, so callers that only
// care about "something went wrong" can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Circuit construction problems (bad shapes, impossible depth, bad layer refs).
class StructureError : public Error {
 public:
  using Error::Error;
};

// Assignment / mask / representation size disagrees with what a circuit or
// model expects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Evidence with zero probability mass.
class ImpossibleEvidenceError : public Error {
 public:
  using Error::Error;
};

// Requested computation is combinatorially out of reach (n! guards, N > n!,
// k > n, ...).
class FeasibilityError : public Error {
 public:
  using Error::Error;
};

// A graph does not fit into the configured slot count.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A GraphTensor violates its structural invariants.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized model or text input.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  VersionError(int found, int expected)
      : FormatError("unsupported model format version " + std::to_string(found) +
                    " (expected " + std::to_string(expected) + ")"),
        found_(found),
        expected_(expected) {}

  int found() const noexcept { return found_; }
  int expected() const noexcept { return expected_; }

 private:
  int found_;
  int expected_;
};

// Training diverged or was handed unusable data.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Query not supported by the model's invariance variant.
class UnsupportedQueryError : public Error {
 public:
  using Error::Error;
};

// Bad user configuration (CLI flags, config file, fractions, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Corpus / dataset problems.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace gspn
