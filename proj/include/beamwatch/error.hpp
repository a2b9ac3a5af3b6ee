#pragma once

#include <stdexcept>
#include <string>

namespace beamwatch {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not agree for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyper-parameters or scenario settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data violating an operation's precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Unknown identifier or out-of-range index.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values detected while NUMERICS_CHECK_FINITE=1, or a NaN loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Dataset and checkpoint built from incompatible codebooks or configs.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

/// On-disk format problems. The kind distinguishes the failure mode.
class FormatError : public Error {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kTruncated, kChecksum, kMalformed, kIo };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace beamwatch
