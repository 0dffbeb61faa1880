#pragma once

#include <stdexcept>
#include <string>

namespace entdecon {

enum class ErrorCode {
  InvalidArgument = 1,
  DimensionMismatch = 2,
  Infeasible = 3,
  NotConverged = 4,
  Io = 5,
  Parse = 6,
};

// Every failure raised by the library carries one of the codes above so the
// C API can map it onto a status value without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& what, double last_marginal_error, std::size_t iterations)
      : Error(ErrorCode::NotConverged, what),
        last_marginal_error_(last_marginal_error),
        iterations_(iterations) {}
  double last_marginal_error() const noexcept { return last_marginal_error_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double last_marginal_error_;
  std::size_t iterations_;
};

}  // namespace entdecon
