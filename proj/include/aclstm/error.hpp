#pragma once

#include <stdexcept>
#include <string>

namespace aclstm {

// Invalid configuration, dimensions, or arguments.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A well-formed request whose mathematical result is undefined (zero energy, etc).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Non-finite values or divergence during numerical work.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class IoErrc {
  unreadable,
  bad_magic,
  bad_version,
  truncated,
  length_mismatch,
  rate_mismatch,
  bad_format,
};

const char* to_string(IoErrc code);

class IoError : public std::runtime_error {
 public:
  IoError(IoErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  IoErrc code() const noexcept { return code_; }

 private:
  IoErrc code_;
};

}  // namespace aclstm
