#pragma once

#include <stdexcept>
#include <string>

namespace embseg {

/// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Missing, malformed or inconsistent data on disk or in memory (exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or failed numerical verification (exit code 4).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::string dump_path = {})
      : std::runtime_error(what), dump_path_(std::move(dump_path)) {}

  const std::string& dump_path() const noexcept { return dump_path_; }

 private:
  std::string dump_path_;
};

}  // namespace embseg
