#pragma once

#include <stdexcept>
#include <string>

namespace pfcpgan {

/// Root of the library's exception hierarchy. Each subclass maps onto one
/// stable CLI exit code (see tools/pfcpgan.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (bad counts, odd batch sizes, unknown keys).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The data cannot satisfy an operation's preconditions (too few subjects, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A file or directory on disk could not be ingested.
class IngestionError : public DataError {
 public:
  IngestionError(const std::string& path, const std::string& what)
      : DataError(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Tensor or vector shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A loss or logit became non-finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An evaluation protocol was violated (single-class fold, probe without gallery entry, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure, with the offending path in the message.
class IoError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public IoError {
 public:
  enum class Kind { kDigestMismatch, kVersionMismatch, kMissingArray, kMalformed };
  CheckpointError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace pfcpgan
