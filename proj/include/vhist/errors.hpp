#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vhist {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Loss became non-finite during training.
class TrainingDivergence : public Error {
 public:
  TrainingDivergence(const std::string& what, int last_good_epoch)
      : Error(what), last_good_epoch_(last_good_epoch) {}
  int last_good_epoch() const noexcept { return last_good_epoch_; }

 private:
  int last_good_epoch_;
};

class CheckpointIncompatible : public Error {
 public:
  using Error::Error;
};

class DomainMismatch : public Error {
 public:
  using Error::Error;
};

class StratificationError : public Error {
 public:
  using Error::Error;
};

class UndefinedKappa : public Error {
 public:
  using Error::Error;
};

class ScheduleComplete : public Error {
 public:
  using Error::Error;
};

// Warnings go to stderr; the counter lets tests observe them.
void warn(const std::string& message);
std::size_t warning_count() noexcept;

}  // namespace vhist
