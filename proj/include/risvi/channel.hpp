#pragma once

#include <vector>

#include "risvi/rng.hpp"
#include "risvi/types.hpp"

namespace risvi::channel {

enum class AngleMode { Mode1, Mode2 };

// Scenario dimensions shared by every module. rho is the linear SNR.
struct SystemConfig {
    int M = 4;        // BS antennas
    int N = 64;       // RIS elements (perfect square)
    int N_p = 50;     // pilots per UE-RIS coherence block
    int N_b = 1;      // coherence blocks in the training window
    double rho = 1.0; // linear SNR
    int P = 3;        // RIS-BS paths
    int Q = 1;        // UE-RIS paths
    AngleMode angle_mode = AngleMode::Mode1;
    int cluster_count = 4;  // Mode2 only

    void validate() const;
    int ris_side() const;  // sqrt(N)
};

struct PathAnglesG {
    double aoa_bs;        // xi_p
    double azimuth_ris;   // phi_p
    double elevation_ris; // varphi_p
};

struct PathAnglesH {
    double azimuth_ris;   // phi_q
    double elevation_ris; // varphi_q
};

struct ChannelRealization {
    CVec h;  // N
    CMat G;  // M x N
    std::vector<PathAnglesG> g_paths;
    std::vector<PathAnglesH> h_paths;
    std::vector<cxd> g_gains;  // alpha_p
    std::vector<cxd> h_gains;  // beta_q

    CVec h_vir(const CMat& F_N) const { return F_N * h; }
    CMat G_vir(const CMat& F_M, const CMat& F_N) const { return F_M * G * F_N; }
};

// Mode2 scenario geometry: the active sub-intervals of the fixed partition
// of [0, 2*pi) into 100 equal pieces. Fixed once per scenario seed.
struct ClusterSet {
    std::vector<int> intervals;
    static constexpr int kPartition = 100;
};

ClusterSet pick_clusters(const SystemConfig& cfg, RandomStream& rng);

// Half-wavelength ULA response, a[m] = exp(j*pi*m*cos(xi))/sqrt(M).
CVec ula_response(int M, double xi);

// UPA response: kron of the two sqrt(N)-element factors with exponents
// pi*m*sin(phi)*sin(vphi) and pi*m*cos(vphi), m = 0..sqrt(N)-1, unit norm.
CVec upa_response(int N, double phi, double vphi);

// Draws one channel realization. Gains are CN(0,1). Mode1 draws every angle
// uniformly on [0, 2*pi); Mode2 confines the UE-RIS angles to the scenario's
// cluster sub-intervals (clusters must then be non-null).
ChannelRealization gen_channels(const SystemConfig& cfg, RandomStream& rng,
                                const ClusterSet* clusters = nullptr);

// Analytic UE-RIS covariance over CN(0,1) gain redraws with angles fixed:
// R_h = (N/Q) * sum_q a_RIS(phi_q, vphi_q) a_RIS^H.
CMat ccm_ground_truth(const ChannelRealization& real, const SystemConfig& cfg);

// R_h = F_N^H diag(d) F_N (Hermitian PSD). Entries of d must be >= 0.
CMat ccm_from_d(const RVec& d);

// Angular spectrum of a covariance matrix: d = diag(F_N R F_N^H) / N^2.
// Inverts ccm_from_d exactly when R has that form; small negative diagonal
// entries from roundoff are clamped to zero.
RVec angular_spectrum(const CMat& R_h);

// h = F_N^H diag(sqrt(d)) z with z ~ CN(0, I); covariance is ccm_from_d(d).
CVec sample_h_from_d(const RVec& d, RandomStream& rng);

}  // namespace risvi::channel
