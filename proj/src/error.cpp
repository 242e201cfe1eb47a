#include "uinject/error.hpp"

namespace uinject {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
      return "usage error";
    case ErrorKind::kConfig:
      return "configuration error";
    case ErrorKind::kNumeric:
      return "numeric error";
    case ErrorKind::kFormat:
      return "format error";
    case ErrorKind::kIo:
      return "i/o error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void throw_usage(const std::string& message) { throw Error(ErrorKind::kUsage, message); }
void throw_config(const std::string& message) { throw Error(ErrorKind::kConfig, message); }
void throw_numeric(const std::string& message) { throw Error(ErrorKind::kNumeric, message); }
void throw_format(const std::string& message) { throw Error(ErrorKind::kFormat, message); }
void throw_io(const std::string& message) { throw Error(ErrorKind::kIo, message); }

}  // namespace uinject
