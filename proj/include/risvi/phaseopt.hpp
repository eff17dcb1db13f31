#pragma once

#include "risvi/types.hpp"

namespace risvi::phaseopt {

// Unit-modulus RIS configuration; v_i = exp(j theta_i), theta in [0, 2*pi).
struct PhaseConfig {
    RVec theta;
    CVec v;

    static PhaseConfig from_theta(const RVec& theta);
};

// Instantaneous-CSI rule: align against the phases of the dominant right
// singular vector of G, theta_k = -(angle(h_k) - angle(vmax_k)).
PhaseConfig phases_icsi(const CMat& G, const CVec& h);

// Statistical-CSI rule: same with the top eigenvector of R_h in place of h.
PhaseConfig phases_scsi(const CMat& G, const CMat& R_h);

// log2(1 + rho * ||G diag(v) h||^2)
double capacity(const CMat& G, const CVec& v, const CVec& h, double rho);

// Tr(G diag(v) R_h diag(v)^H G^H), the expected beamforming gain over h.
double expected_gain(const CMat& G, const CVec& v, const CMat& R_h);

// log2(1 + rho * expected_gain); Jensen upper bound on the mean capacity.
double capacity_upper_bound(const CMat& G, const CVec& v, const CMat& R_h, double rho);

}  // namespace risvi::phaseopt
