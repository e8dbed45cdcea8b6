#pragma once

#include <stdexcept>
#include <string>

namespace vlcest {

/// Argument outside the mathematical domain of an operation (e.g. a semi-angle of 90 degrees).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Scene layout that cannot produce a channel (zero distance, arrays outside the room).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or image dimensions that do not fit the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN/Inf, divergence, or a failed factorization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad magic, unsupported version, truncated or inconsistent file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation called out of order (e.g. backward before a training forward).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Experimental protocol violation, such as train and test ids overlapping.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vlcest
