#pragma once

#include <stdexcept>
#include <string>

namespace pdc {

// Bad config files, unknown keys, incompatible checkpoints. CLI exit code 1.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failures at runtime (NaN loss, no-mass response map). CLI exit code 2.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem and format failures. CLI exit code 3.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pdc
