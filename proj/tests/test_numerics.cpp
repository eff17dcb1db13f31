#include <doctest.h>

#include "risvi/numerics.hpp"
#include "risvi/rng.hpp"

using namespace risvi;
using namespace risvi::numerics;

namespace {

CMat random_matrix(Eigen::Index rows, Eigen::Index cols, RandomStream& rng) {
    CMat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.cnormal();
    }
    return m;
}

}  // namespace

TEST_CASE("dft_matrix basics") {
    CHECK(dft_matrix(1)(0, 0) == cxd(1.0, 0.0));

    const CMat f2 = dft_matrix(2);
    CHECK(std::abs(f2(0, 0) - cxd(1, 0)) < 1e-15);
    CHECK(std::abs(f2(0, 1) - cxd(1, 0)) < 1e-15);
    CHECK(std::abs(f2(1, 0) - cxd(1, 0)) < 1e-15);
    CHECK(std::abs(f2(1, 1) - cxd(-1, 0)) < 1e-15);

    const CMat f8 = dft_matrix(8);
    CHECK((f8 * f8.adjoint() - 8.0 * CMat::Identity(8, 8)).norm() < 1e-12);

    CHECK_THROWS_AS(dft_matrix(0), dimension_error);
}

TEST_CASE("dft unitarity across sizes") {
    for (Eigen::Index n : {1, 2, 4, 8, 16, 64}) {
        const CMat f = dft_matrix(n);
        CHECK((f * f.adjoint() - static_cast<double>(n) * CMat::Identity(n, n)).norm() < 1e-10);
    }
}

TEST_CASE("svd identity and diagonal cases") {
    const auto r_id = svd(CMat::Identity(2, 2));
    CHECK(r_id.s(0) == doctest::Approx(1.0));
    CHECK(r_id.s(1) == doctest::Approx(1.0));

    CMat a(2, 2);
    a << cxd(2, 0), cxd(0, 0), cxd(0, 0), cxd(0, 0);
    const auto r = svd(a);
    CHECK(r.s(0) == doctest::Approx(2.0));
    CHECK(r.s(1) == doctest::Approx(0.0));
    CHECK(std::abs(r.V(0, 0) - cxd(1, 0)) < 1e-12);
    CHECK(std::abs(r.V(1, 0)) < 1e-12);
}

TEST_CASE("svd reconstruction on random rectangular input") {
    RandomStream rng(42);
    const CMat a = random_matrix(4, 6, rng);
    const auto r = svd(a);
    const CMat rec = r.U * r.s.asDiagonal() * r.V.adjoint();
    CHECK((a - rec).norm() / a.norm() < 1e-10);
    CHECK((r.U.adjoint() * r.U - CMat::Identity(4, 4)).norm() < 1e-12);
    CHECK((r.V.adjoint() * r.V - CMat::Identity(4, 4)).norm() < 1e-12);
}

TEST_CASE("svd/eigh reconstruction sweep and phase determinism") {
    RandomStream rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng.uniform() * 16);
        const Eigen::Index cols = 1 + static_cast<Eigen::Index>(rng.uniform() * 64);
        const CMat a = random_matrix(rows, cols, rng);
        const auto r = svd(a);
        CHECK((a - r.U * r.s.asDiagonal() * r.V.adjoint()).norm() / a.norm() < 1e-10);
        for (Eigen::Index i = 0; i + 1 < r.s.size(); ++i) CHECK(r.s(i) >= r.s(i + 1));

        const CMat herm = a * a.adjoint();
        const auto e = eigh(herm);
        CHECK((herm - e.P * e.lambda.asDiagonal() * e.P.adjoint()).norm() /
                  std::max(herm.norm(), 1.0) <
              1e-10);
    }

    // decomposing the same matrix twice is bitwise reproducible
    const CMat a = random_matrix(5, 9, rng);
    const auto r1 = svd(a);
    const auto r2 = svd(a);
    CHECK(r1.U == r2.U);
    CHECK(r1.V == r2.V);
    CHECK(r1.s == r2.s);
}

TEST_CASE("eigh basics") {
    const auto id = eigh(CMat::Identity(3, 3));
    for (int i = 0; i < 3; ++i) CHECK(id.lambda(i) == doctest::Approx(1.0));

    CMat d(2, 2);
    d << cxd(3, 0), cxd(0, 0), cxd(0, 0), cxd(1, 0);
    const auto r = eigh(d);
    CHECK(r.lambda(0) == doctest::Approx(3.0));
    CHECK(r.lambda(1) == doctest::Approx(1.0));
    CHECK((r.P - CMat::Identity(2, 2)).norm() < 1e-12);

    RandomStream rng(11);
    CVec a(5);
    for (int i = 0; i < 5; ++i) a(i) = rng.cnormal();
    const CMat rank1 = a * a.adjoint();
    const auto e = eigh(rank1);
    CHECK(e.lambda(0) == doctest::Approx(a.squaredNorm()).epsilon(1e-10));
    for (int i = 1; i < 5; ++i) CHECK(std::abs(e.lambda(i)) < 1e-10);

    CMat bad(2, 2);
    bad << cxd(1, 0), cxd(1, 0), cxd(0, 0), cxd(1, 0);
    CHECK_THROWS_AS(eigh(bad), contract_error);
}

TEST_CASE("khatri_rao structure") {
    RandomStream rng(3);
    const CMat a1 = random_matrix(3, 1, rng);
    const CMat b1 = random_matrix(2, 1, rng);
    const CMat kr1 = khatri_rao(a1, b1);
    for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index k = 0; k < 2; ++k) {
            CHECK(std::abs(kr1(i * 2 + k, 0) - a1(i, 0) * b1(k, 0)) < 1e-15);
        }
    }

    const CMat kr_id = khatri_rao(CMat::Identity(2, 2), CMat::Identity(2, 2));
    CHECK(kr_id.rows() == 4);
    CHECK(kr_id.cols() == 2);
    CVec e1 = CVec::Zero(4), e4 = CVec::Zero(4);
    e1(0) = 1.0;
    e4(3) = 1.0;
    CHECK((kr_id.col(0) - e1).norm() < 1e-15);
    CHECK((kr_id.col(1) - e4).norm() < 1e-15);

    CHECK_THROWS_AS(khatri_rao(CMat::Identity(2, 2), CMat::Identity(2, 3)), dimension_error);
}

TEST_CASE("khatri_rao vectorization identity") {
    RandomStream rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.uniform() * 4);
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 5);
        const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.uniform() * 4);
        const CMat a = random_matrix(m, n, rng);   // plays G
        const CMat c = random_matrix(n, p, rng);   // plays Phi
        CVec x(n);
        for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.cnormal();

        const CMat y = a * x.asDiagonal() * c;
        const Eigen::Map<const CVec> vec_y(y.data(), y.size());
        const CVec rhs = khatri_rao(c.transpose(), a) * x;
        CHECK((vec_y - rhs).norm() < 1e-12 * std::max(1.0, rhs.norm()));
    }
}

TEST_CASE("chol_logdet_solve") {
    const CMat b = CMat::Random(3, 2);
    const auto id = chol_logdet_solve(CMat::Identity(3, 3), b);
    CHECK((id.X - b).norm() < 1e-14);
    CHECK(id.logdet == doctest::Approx(0.0));

    const auto two = chol_logdet_solve(2.0 * CMat::Identity(3, 3), CMat::Identity(3, 3));
    CHECK(two.logdet == doctest::Approx(3.0 * std::log(2.0)));

    RandomStream rng(5);
    const CMat l = random_matrix(6, 6, rng);
    const CMat a = l * l.adjoint() + CMat::Identity(6, 6);
    const auto r = chol_logdet_solve(a, CMat::Identity(6, 6));
    CHECK((a * r.X - CMat::Identity(6, 6)).norm() < 1e-10);

    // independent route: log-determinant from the eigenvalues
    const auto e = eigh(a);
    double logdet_eig = 0.0;
    for (Eigen::Index i = 0; i < e.lambda.size(); ++i) logdet_eig += std::log(e.lambda(i));
    CHECK(r.logdet == doctest::Approx(logdet_eig).epsilon(1e-10));

    // indefinite input fails even after the one-shot jitter
    CMat indef = CMat::Identity(2, 2);
    indef(1, 1) = cxd(-1.0, 0.0);
    CHECK_THROWS_AS(chol_logdet_solve(indef, CMat::Identity(2, 2)), numerical_error);
}
