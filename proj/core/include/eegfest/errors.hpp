#pragma once

#include <stdexcept>
#include <string>

namespace eegfest {

// Shapes that do not compose (matmul inner dims, checkpoint tensor vs model).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN or otherwise unusable numeric input.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Bad configuration: unknown keys, odd PE dimension, unsupported sample rate.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller misuse, e.g. backward() on a non-scalar.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Labels outside their legal range.
class LabelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Not enough data for the requested protocol.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric that is mathematically undefined for its input (e.g. PCC of a constant).
class MetricUndefined : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Bad magic / version in a binary container.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Truncated or otherwise damaged file.
class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace eegfest
