#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "assembly.hpp"

namespace msgfem {

/// Fill-in statistics of a sparse LU factorization.
struct FactorStats {
  Index n = 0;
  Index nnz_matrix = 0;
  Index nnz_L = 0;
  Index nnz_U = 0;
  double avg_L_per_row() const { return n ? double(nnz_L) / double(n) : 0.0; }
  double avg_U_per_row() const { return n ? double(nnz_U) / double(n) : 0.0; }
  double avg_per_row() const {
    return n ? double(nnz_L + nnz_U) / double(n) : 0.0;
  }
};

/// Sparse LU with COLAMD ordering (deterministic), plus fill-in stats.
class SparseFactorization {
 public:
  explicit SparseFactorization(const SpMat& A) {
    lu_.compute(A);
    if (lu_.info() != Eigen::Success)
      throw std::runtime_error("SparseFactorization: LU failed (singular?)");
    stats_.n = A.rows();
    stats_.nnz_matrix = A.nonZeros();
    stats_.nnz_L = lu_.nnzL();
    stats_.nnz_U = lu_.nnzU();
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return lu_.solve(b); }
  const FactorStats& stats() const { return stats_; }

 private:
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  FactorStats stats_;
};

/// Cholesky for SPD local problems (deterministic AMD ordering).
class SpdFactorization {
 public:
  SpdFactorization() = default;
  explicit SpdFactorization(const SpMat& A) { compute(A); }
  void compute(const SpMat& A) {
    chol_.compute(A);
    if (chol_.info() != Eigen::Success)
      throw std::runtime_error("SpdFactorization: LDLT failed (not SPD?)");
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    return chol_.solve(b);
  }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const {
    return chol_.solve(b);
  }

 private:
  Eigen::SimplicialLDLT<SpMat> chol_;
};

}  // namespace msgfem
