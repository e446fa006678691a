#pragma once

#include <stdexcept>
#include <string>

namespace spwarp {

/// Failure category; the CLI maps each one to a distinct exit code.
enum class ErrorKind {
  config = 2,
  data = 3,
  numeric = 4,
  version = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return {ErrorKind::config, msg}; }
inline Error data_error(const std::string& msg) { return {ErrorKind::data, msg}; }
inline Error numeric_error(const std::string& msg) { return {ErrorKind::numeric, msg}; }
inline Error version_error(const std::string& msg) { return {ErrorKind::version, msg}; }

}  // namespace spwarp
