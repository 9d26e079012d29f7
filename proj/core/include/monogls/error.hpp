#pragma once

#include <stdexcept>
#include <string>

namespace monogls {

enum class ErrorKind {
  schema,          // CSV column missing or schema inconsistent
  parse,           // cell could not be read as a finite number
  size,            // too few observations / mismatched lengths
  value,           // non-finite or out-of-domain input value
  index,           // index out of range
  parameter,       // bad tuning parameter
  singular_design, // rank-deficient design or moment matrix
  degrees_of_freedom,
  rank,            // under-identification in IV estimation
  insufficient_data,
  degenerate_covariate,
  optimization,
  study,           // Monte Carlo failure circuit breaker
};

const char* to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace monogls
