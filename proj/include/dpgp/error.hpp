#pragma once

#include <stdexcept>
#include <string>

namespace dpgp {

// Shape disagreement between matrices, vectors or kernel parameters.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A covariance could not be Cholesky-factorized, even after jitter.
class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotDiagonallyDominant : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dpgp
