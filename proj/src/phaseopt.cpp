#include "risvi/phaseopt.hpp"

#include <cmath>

#include "risvi/numerics.hpp"

namespace risvi::phaseopt {

PhaseConfig PhaseConfig::from_theta(const RVec& theta) {
    PhaseConfig cfg;
    cfg.theta.resize(theta.size());
    cfg.v.resize(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        cfg.theta(i) = wrap_angle(theta(i));
        cfg.v(i) = cxd(std::cos(cfg.theta(i)), std::sin(cfg.theta(i)));
    }
    return cfg;
}

namespace {

PhaseConfig align_phases(const CVec& reference, const CVec& vmax) {
    RVec theta(reference.size());
    for (Eigen::Index k = 0; k < reference.size(); ++k) {
        theta(k) = -(std::arg(reference(k)) - std::arg(vmax(k)));
    }
    return PhaseConfig::from_theta(theta);
}

}  // namespace

PhaseConfig phases_icsi(const CMat& G, const CVec& h) {
    require(G.norm() > 0.0, "phases_icsi: G must be nonzero");
    require(h.norm() > 0.0, "phases_icsi: h must be nonzero");
    require_dim(G.cols() == h.size(), "phases_icsi: dimension mismatch");
    const auto dec = numerics::svd(G);
    return align_phases(h, dec.V.col(0));
}

PhaseConfig phases_scsi(const CMat& G, const CMat& R_h) {
    require(G.norm() > 0.0, "phases_scsi: G must be nonzero");
    require(R_h.norm() > 0.0, "phases_scsi: R_h must be nonzero");
    require_dim(G.cols() == R_h.rows() && R_h.rows() == R_h.cols(), "phases_scsi: dimension mismatch");
    const auto dec = numerics::svd(G);
    const auto eig = numerics::eigh(R_h);
    return align_phases(eig.P.col(0), dec.V.col(0));
}

double capacity(const CMat& G, const CVec& v, const CVec& h, double rho) {
    require_dim(G.cols() == v.size() && v.size() == h.size(), "capacity: dimension mismatch");
    const double gain = (G * v.cwiseProduct(h)).squaredNorm();
    return std::log2(1.0 + rho * gain);
}

double expected_gain(const CMat& G, const CVec& v, const CMat& R_h) {
    require_dim(G.cols() == v.size() && R_h.rows() == v.size(), "expected_gain: dimension mismatch");
    const CMat Gd = G * v.asDiagonal();
    return (Gd * R_h * Gd.adjoint()).trace().real();
}

double capacity_upper_bound(const CMat& G, const CVec& v, const CMat& R_h, double rho) {
    return std::log2(1.0 + rho * expected_gain(G, v, R_h));
}

}  // namespace risvi::phaseopt
