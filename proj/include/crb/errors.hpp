#ifndef CRB_ERRORS_HPP
#define CRB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace crb {

/// Base class of every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

/// Input matrix is asymmetric beyond the construction tolerance.
struct NotSymmetric : Error {
  using Error::Error;
};

/// A Cholesky factorization failed. The message names the offending
/// quantity (the full matrix, or the block whose Schur complement broke).
struct NotPositiveDefinite : Error {
  using Error::Error;
};

/// Requested Schur complement would eliminate nothing.
struct EmptyComplement : Error {
  using Error::Error;
};

/// chain_decompose order is not a permutation of the partition's blocks.
struct InvalidOrder : Error {
  using Error::Error;
};

struct RankDeficient : Error {
  using Error::Error;
};

struct SingularJacobian : Error {
  using Error::Error;
};

/// Iterative refinement failed; for Monte Carlo experiments this is also
/// thrown when the share of discarded trials exceeds the loud-failure cap.
struct ConvergenceFailure : Error {
  using Error::Error;
};

/// Malformed argument that is not a numerical failure (unknown block name,
/// bad trial count, out-of-range model parameter, ...).
struct InvalidArgument : Error {
  using Error::Error;
};

/// Unreadable or schema-violating config/matrix file.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace crb

#endif
