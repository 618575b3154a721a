#include "vtp/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SparseCholesky>

#include "vtp/error.hpp"

namespace vtp {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;


class Basis {
 public:
  Basis(const SparseMatrix& m, Index capacity) : m_(m), v_(m.rows(), capacity), mv_(m.rows(), capacity) {}

  Index size() const { return size_; }
  const MatrixXd& v() const { return v_; }
  const MatrixXd& mv() const { return mv_; }

  // Appends the M-orthonormalised columns of `w`; columns that vanish after
  // projection are replaced by fresh random directions.
  void append(MatrixXd w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (Index c = 0; c < w.cols(); ++c) {
      VectorXd x = w.col(c);
      for (int attempt = 0; attempt < 8; ++attempt) {
        const double before = std::sqrt(std::max(x.dot(m_ * x), 0.0));
        for (int pass = 0; pass < 2; ++pass) {
          if (size_ > 0) {
            const VectorXd coef = mv_.leftCols(size_).transpose() * x;
            x.noalias() -= v_.leftCols(size_) * coef;
          }
        }
        const VectorXd mx = m_ * x;
        const double norm = std::sqrt(std::max(x.dot(mx), 0.0));
        if (norm > 1e-10 * before && norm > 0.0) {
          v_.col(size_) = x / norm;
          mv_.col(size_) = mx / norm;
          ++size_;
          break;
        }
        for (Index i = 0; i < x.size(); ++i) x[i] = uni(rng);
      }
    }
  }

 private:
  const SparseMatrix& m_;
  MatrixXd v_;
  MatrixXd mv_;
  Index size_ = 0;
};

}  // namespace

EigenPairs lowest_eigenpairs(const SparseMatrix& k, const SparseMatrix& m, const EigenOptions& options) {
  const Index n = k.rows();
  const int count = options.count;
  const int b = options.block_size;
  if (n != k.cols() || m.rows() != n || m.cols() != n || count < 1 || count > n) {
    throw Error(ErrorCode::EigenSolveFailure, "inconsistent eigenproblem dimensions");
  }
  const Index cap = std::min<Index>(options.max_dimension, n);

  SparseMatrix shifted = k + options.shift * m;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorCode::EigenSolveFailure, "factorisation of the shifted operator failed");
  }
  if ((ldlt.vectorD().array() <= 0.0).any()) {
    throw Error(ErrorCode::EigenSolveFailure, "shifted operator is not positive definite");
  }

  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Basis basis(m, cap);
  MatrixXd start(n, b);
  for (Index c = 0; c < b; ++c)
    for (Index i = 0; i < n; ++i) start(i, c) = uni(rng);
  basis.append(start, rng);

  MatrixXd z(n, cap);  // z.col(j) = (K + shift M)^-1 M v_j
  Index z_count = 0;
  EigenPairs out;

  Index limit = cap;
  std::vector<double> previous;
  while (true) {
    const Index first = z_count;
    const Index last = basis.size();
    for (Index j = first; j < last; ++j) z.col(j) = ldlt.solve(basis.mv().col(j));
    z_count = last;
    const bool at_limit = z_count >= limit;

    if (z_count >= count + 2 * b || at_limit) {
      MatrixXd t = basis.mv().leftCols(z_count).transpose() * z.leftCols(z_count);
      t = 0.5 * (t + t.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<MatrixXd> small(t);
      // largest theta <-> smallest lambda
      const VectorXd& theta = small.eigenvalues();
      std::vector<double> values(static_cast<std::size_t>(count));
      MatrixXd x(n, count);
      std::vector<double> residuals(static_cast<std::size_t>(count));
      bool converged = z_count >= count;
      for (int i = 0; i < count; ++i) {
        const Index col = z_count - 1 - i;
        x.col(i) = basis.v().leftCols(z_count) * small.eigenvectors().col(col);
        const double lambda = 1.0 / theta[col] - options.shift;
        const VectorXd mx = m * x.col(i);
        const VectorXd r = k * x.col(i) - lambda * mx;
        const double scale = std::max(std::abs(lambda), options.shift) * mx.norm();
        residuals[static_cast<std::size_t>(i)] = r.norm() / scale;
        values[static_cast<std::size_t>(i)] = lambda;
        const double res = residuals[static_cast<std::size_t>(i)];
        const double tol = std::abs(lambda) < options.shift ? options.null_tolerance : options.tolerance;
        const bool stalled = !previous.empty() && res > 0.5 * previous[static_cast<std::size_t>(i)] &&
                             res < options.stall_ceiling;
        if (!(res < tol) && !stalled) converged = false;
      }
      previous = residuals;
      if (converged) {
        out.values = std::move(values);
        out.vectors = std::move(x);
        out.residuals = std::move(residuals);
        out.subspace_dimension = static_cast<int>(z_count);
        return out;
      }
      if (at_limit) {
        throw Error(ErrorCode::EigenSolveFailure, "eigenpairs did not converge within the subspace cap");
      }
    }
    basis.append(z.middleCols(first, std::min<Index>(last - first, limit - basis.size())), rng);
    if (basis.size() == last) limit = last;  // invariant subspace reached
  }
}

}  // namespace vtp
