#pragma once

#include <stdexcept>
#include <string>

namespace uinject {

enum class ErrorKind {
  kUsage,    // caller broke a precondition
  kConfig,   // inconsistent dimensions or configuration values
  kNumeric,  // singular matrix, non-finite value, diverged evaluation
  kFormat,   // malformed or incompatible file contents
  kIo,       // file could not be opened or written
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_usage(const std::string& message);
[[noreturn]] void throw_config(const std::string& message);
[[noreturn]] void throw_numeric(const std::string& message);
[[noreturn]] void throw_format(const std::string& message);
[[noreturn]] void throw_io(const std::string& message);

}  // namespace uinject
