#pragma once

#include "risvi/types.hpp"

namespace risvi::numerics {

// Unnormalized forward DFT matrix: F[j][k] = exp(-2*pi*i*j*k/n), so that
// F * F^H = n * I and F^{-1} = (1/n) F^H.
CMat dft_matrix(Eigen::Index n);

// Memoized variant for hot loops. References stay valid for the process
// lifetime; only a handful of sizes ever occur.
const CMat& dft_matrix_cached(Eigen::Index n);

struct SvdResult {
    CMat U;   // columns orthonormal
    RVec s;   // descending, nonnegative
    CMat V;   // columns orthonormal
};

// Thin SVD A = U diag(s) V^H. Singular values are sorted descending. Each
// right singular vector is rotated so its largest-magnitude entry (first
// index on ties) is real positive; the matching left vector carries the
// compensating rotation so the reconstruction identity is preserved.
SvdResult svd(const CMat& A);

struct EighResult {
    RVec lambda;  // descending
    CMat P;       // unitary, phase-fixed columns
};

// Hermitian eigendecomposition A = P diag(lambda) P^H. Input must be
// Hermitian within 1e-10 relative Frobenius norm.
EighResult eigh(const CMat& A);

// Column-wise Kronecker (Khatri-Rao) product: column j of the result is
// kron(A[:,j], B[:,j]); the result has A.rows()*B.rows() rows.
CMat khatri_rao(const CMat& A, const CMat& B);

struct CholSolveResult {
    CMat X;
    double logdet;
};

// Cholesky factor of a Hermitian positive definite matrix, reusable for
// solves and the log-determinant. If the first factorization fails, a single
// 1e-9*I jitter is added before giving up.
class CholeskyFactor {
  public:
    explicit CholeskyFactor(const CMat& A);

    CMat solve(const CMat& B) const;
    CVec solve(const CVec& b) const;
    double logdet() const { return logdet_; }

  private:
    Eigen::LLT<CMat> llt_;
    double logdet_ = 0.0;
};

// Solves A X = B and returns log|A| from one factorization.
CholSolveResult chol_logdet_solve(const CMat& A, const CMat& B);

}  // namespace risvi::numerics
