#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace vtp {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct EigenOptions {
  int count = 13;
  double shift = 1.0;     // positive; factorises K + shift * M
  double tolerance = 1e-8;
  double null_tolerance = 1e-6;  // pairs with |lambda| < shift (rigid motions)
  // A pair whose residual no longer halves between Rayleigh-Ritz passes is
  // accepted once below this ceiling: on fine lattices the round-off in
  // evaluating K x exceeds `tolerance`.
  double stall_ceiling = 1e-6;
  int block_size = 4;
  int max_dimension = 360;
};

struct EigenPairs {
  std::vector<double> values;  // ascending
  Eigen::MatrixXd vectors;     // M-orthonormal columns
  std::vector<double> residuals;
  int subspace_dimension = 0;
};

// Lowest `count` eigenpairs of K x = lambda M x for symmetric positive
// semi-definite K and symmetric positive definite M. Block Krylov iteration
// on (K + shift M)^-1 M with full M-reorthogonalisation, followed by
// Rayleigh-Ritz; converged when ||K x - lambda M x|| / (max(|lambda|, shift)
// ||M x||) < tolerance for every wanted pair (null_tolerance for pairs below
// the shift, whose residual floor is set by round-off in K). The block form keeps repeated
// eigenvalues (rigid modes, symmetric plates) from being missed.
// Throws Error(EigenSolveFailure) when the subspace cap is reached first.
EigenPairs lowest_eigenpairs(const SparseMatrix& k, const SparseMatrix& m, const EigenOptions& options);

}  // namespace vtp
