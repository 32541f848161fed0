#pragma once

#include <stdexcept>
#include <string>

namespace cemgms {

/// A numerical stage failed (factorization, eigensolve, singular system).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cemgms
