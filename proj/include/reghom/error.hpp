#pragma once

#include <stdexcept>
#include <string>

namespace reghom {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver stopped before reaching the requested tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double achieved, int iterations)
      : Error(what), achieved_(achieved), iterations_(iterations) {}

  double achieved_residual() const noexcept { return achieved_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double achieved_;
  int iterations_;
};

}  // namespace reghom
