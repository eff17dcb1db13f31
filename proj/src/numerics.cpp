#include "risvi/numerics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <map>
#include <mutex>

namespace risvi::numerics {

namespace {

// Rotate each column so its largest-magnitude entry is real positive.
// `companion`, when given, receives the conjugate rotation column-by-column
// (used to keep U consistent with a phase-fixed V in the SVD).
void fix_column_phases(CMat& m, CMat* companion = nullptr) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        Eigen::Index imax = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double a = std::abs(m(i, j));
            if (a > best + 1e-15) {
                best = a;
                imax = i;
            }
        }
        if (best <= 0.0) continue;
        const cxd pivot = m(imax, j);
        const cxd rot = std::conj(pivot) / std::abs(pivot);
        m.col(j) *= rot;
        // clean up roundoff on the pivot itself
        m(imax, j) = cxd(std::abs(pivot), 0.0);
        if (companion && j < companion->cols()) companion->col(j) *= rot;
    }
}

}  // namespace

CMat dft_matrix(Eigen::Index n) {
    require_dim(n >= 1, "dft_matrix: size must be >= 1");
    CMat f(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const double phase = -kTwoPi * static_cast<double>(j) * static_cast<double>(k) / static_cast<double>(n);
            f(j, k) = cxd(std::cos(phase), std::sin(phase));
        }
    }
    return f;
}

const CMat& dft_matrix_cached(Eigen::Index n) {
    static std::mutex mutex;
    static std::map<Eigen::Index, CMat> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, dft_matrix(n)).first;
    return it->second;
}

SvdResult svd(const CMat& A) {
    require(all_finite(A), "svd: input has non-finite entries");
    Eigen::JacobiSVD<CMat> dec(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) {
        throw numerical_error("svd: Jacobi iteration did not converge");
    }
    SvdResult r;
    r.U = dec.matrixU();
    r.s = dec.singularValues();
    r.V = dec.matrixV();
    // Eigen returns descending singular values already; the convention is
    // pinned on V with the compensating rotation applied to U.
    fix_column_phases(r.V, &r.U);
    return r;
}

EighResult eigh(const CMat& A) {
    require(all_finite(A), "eigh: input has non-finite entries");
    require_dim(A.rows() == A.cols(), "eigh: matrix must be square");
    const double scale = A.norm();
    const double asym = (A - A.adjoint()).norm();
    if (asym > 1e-10 * std::max(scale, 1.0)) {
        throw contract_error("eigh: input is not Hermitian within tolerance");
    }
    Eigen::SelfAdjointEigenSolver<CMat> dec(0.5 * (A + A.adjoint()));
    if (dec.info() != Eigen::Success) {
        throw numerical_error("eigh: eigensolver did not converge");
    }
    const Eigen::Index n = A.rows();
    EighResult r;
    r.lambda.resize(n);
    r.P.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {  // ascending -> descending
        r.lambda(i) = dec.eigenvalues()(n - 1 - i);
        r.P.col(i) = dec.eigenvectors().col(n - 1 - i);
    }
    fix_column_phases(r.P);
    return r;
}

CMat khatri_rao(const CMat& A, const CMat& B) {
    require_dim(A.cols() == B.cols(), "khatri_rao: column counts must match");
    CMat out(A.rows() * B.rows(), A.cols());
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
        for (Eigen::Index ia = 0; ia < A.rows(); ++ia) {
            out.block(ia * B.rows(), j, B.rows(), 1) = A(ia, j) * B.col(j);
        }
    }
    return out;
}

CholeskyFactor::CholeskyFactor(const CMat& A) {
    require_dim(A.rows() == A.cols(), "cholesky: matrix must be square");
    require(all_finite(A), "cholesky: input has non-finite entries");
    llt_.compute(A);
    if (llt_.info() != Eigen::Success) {
        CMat jittered = A + 1e-9 * CMat::Identity(A.rows(), A.cols());
        llt_.compute(jittered);
        if (llt_.info() != Eigen::Success) {
            throw numerical_error("cholesky: matrix not positive definite after 1e-9 jitter");
        }
    }
    logdet_ = 0.0;
    const auto& L = llt_.matrixLLT();
    for (Eigen::Index i = 0; i < L.rows(); ++i) logdet_ += 2.0 * std::log(std::real(L(i, i)));
}

CMat CholeskyFactor::solve(const CMat& B) const { return llt_.solve(B); }

CVec CholeskyFactor::solve(const CVec& b) const { return llt_.solve(b); }

CholSolveResult chol_logdet_solve(const CMat& A, const CMat& B) {
    require_dim(A.rows() == B.rows(), "chol_logdet_solve: dimension mismatch");
    CholeskyFactor fac(A);
    return {fac.solve(B), fac.logdet()};
}

}  // namespace risvi::numerics
