#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace atbilstm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// timeseries-io
class FileNotFound : public Error {
 public:
  explicit FileNotFound(const std::string& path) : Error("file not found: " + path), path(path) {}
  std::string path;
};

class MalformedRow : public Error {
 public:
  MalformedRow(std::size_t line, const std::string& why)
      : Error("malformed row at line " + std::to_string(line) + ": " + why), line(line) {}
  std::size_t line;
};

class DuplicateDate : public Error {
 public:
  explicit DuplicateDate(const std::string& date) : Error("duplicate date " + date), date(date) {}
  std::string date;
};

class NoAnchor : public Error {
 public:
  NoAnchor() : Error("first calendar date has no observed quote") {}
};

class InsufficientNeighbors : public Error {
 public:
  explicit InsufficientNeighbors(const std::string& date)
      : Error("not enough observed neighbours to interpolate " + date), date(date) {}
  std::string date;
};

// indicators
class ZeroPrice : public Error {
 public:
  explicit ZeroPrice(std::size_t index) : Error("zero price at index " + std::to_string(index)), index(index) {}
  std::size_t index;
};

class WindowTooLarge : public Error {
 public:
  WindowTooLarge(std::size_t window, std::size_t length)
      : Error("window " + std::to_string(window) + " exceeds series length " + std::to_string(length)) {}
};

class AlignmentMismatch : public Error {
 public:
  using Error::Error;
};

// garch
class SeriesTooShort : public Error {
 public:
  using Error::Error;
};

class OptimizerDiverged : public Error {
 public:
  using Error::Error;
};

class ConstraintInfeasible : public Error {
 public:
  using Error::Error;
};

// neuralnet
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class BatchTooSmall : public Error {
 public:
  BatchTooSmall() : Error("batch normalisation needs at least two samples in train mode") {}
};

class InvalidRate : public Error {
 public:
  explicit InvalidRate(double rate) : Error("dropout rate must lie in [0,1), got " + std::to_string(rate)) {}
};

class StaleCache : public Error {
 public:
  StaleCache() : Error("forward cache already consumed by a backward pass") {}
};

// pipeline
class TooFewRows : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class TooShortHistory : public Error {
 public:
  using Error::Error;
};

class OneClassOnly : public Error {
 public:
  OneClassOnly() : Error("AUC undefined: realized returns contain only one class") {}
};


}  // namespace atbilstm
