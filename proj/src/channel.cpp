#include "risvi/channel.hpp"

#include <algorithm>
#include <cmath>

#include "risvi/numerics.hpp"

namespace risvi::channel {

void SystemConfig::validate() const {
    require_dim(M >= 1, "SystemConfig: M must be >= 1");
    require_dim(N >= 1, "SystemConfig: N must be >= 1");
    const int side = static_cast<int>(std::llround(std::sqrt(static_cast<double>(N))));
    require_dim(side * side == N, "SystemConfig: N must be a perfect square");
    require_dim(N_p >= 1, "SystemConfig: N_p must be >= 1");
    require_dim(N_b >= 1, "SystemConfig: N_b must be >= 1");
    require(rho >= 0.0, "SystemConfig: rho must be >= 0");
    require_dim(P >= 1, "SystemConfig: P must be >= 1");
    require_dim(Q >= 1, "SystemConfig: Q must be >= 1");
    if (angle_mode == AngleMode::Mode2) {
        require(cluster_count >= 1 && cluster_count <= ClusterSet::kPartition,
                "SystemConfig: cluster_count out of range");
    }
}

int SystemConfig::ris_side() const {
    return static_cast<int>(std::llround(std::sqrt(static_cast<double>(N))));
}

ClusterSet pick_clusters(const SystemConfig& cfg, RandomStream& rng) {
    cfg.validate();
    ClusterSet cs;
    cs.intervals.reserve(static_cast<std::size_t>(cfg.cluster_count));
    // sample distinct interval indices from the 100-partition
    while (static_cast<int>(cs.intervals.size()) < cfg.cluster_count) {
        const int idx = static_cast<int>(rng.uniform() * ClusterSet::kPartition);
        if (std::find(cs.intervals.begin(), cs.intervals.end(), idx) == cs.intervals.end()) {
            cs.intervals.push_back(idx);
        }
    }
    std::sort(cs.intervals.begin(), cs.intervals.end());
    return cs;
}

CVec ula_response(int M, double xi) {
    require_dim(M >= 1, "ula_response: M must be >= 1");
    CVec a(M);
    const double step = kPi * std::cos(xi);
    const double scale = 1.0 / std::sqrt(static_cast<double>(M));
    for (int m = 0; m < M; ++m) {
        const double phase = step * m;
        a(m) = scale * cxd(std::cos(phase), std::sin(phase));
    }
    return a;
}

CVec upa_response(int N, double phi, double vphi) {
    const int side = static_cast<int>(std::llround(std::sqrt(static_cast<double>(N))));
    require_dim(side >= 1 && side * side == N, "upa_response: N must be a perfect square");
    const double step_u = kPi * std::sin(phi) * std::sin(vphi);
    const double step_w = kPi * std::cos(vphi);
    CVec u(side), w(side);
    for (int m = 0; m < side; ++m) {
        u(m) = cxd(std::cos(step_u * m), std::sin(step_u * m));
        w(m) = cxd(std::cos(step_w * m), std::sin(step_w * m));
    }
    CVec a(N);
    const double scale = 1.0 / std::sqrt(static_cast<double>(N));
    for (int i = 0; i < side; ++i) {
        for (int k = 0; k < side; ++k) {
            a(i * side + k) = scale * u(i) * w(k);
        }
    }
    return a;
}

namespace {

double draw_angle(RandomStream& rng, const ClusterSet* clusters) {
    if (!clusters) return rng.uniform(0.0, kTwoPi);
    const int which = static_cast<int>(rng.uniform() * static_cast<double>(clusters->intervals.size()));
    const double width = kTwoPi / ClusterSet::kPartition;
    const double lo = clusters->intervals[static_cast<std::size_t>(which)] * width;
    return wrap_angle(lo + width * rng.uniform());
}

}  // namespace

ChannelRealization gen_channels(const SystemConfig& cfg, RandomStream& rng, const ClusterSet* clusters) {
    cfg.validate();
    const bool clustered = cfg.angle_mode == AngleMode::Mode2;
    if (clustered) {
        require(clusters != nullptr, "gen_channels: Mode2 requires a ClusterSet");
    }

    ChannelRealization out;
    out.G = CMat::Zero(cfg.M, cfg.N);
    out.h = CVec::Zero(cfg.N);
    out.g_paths.reserve(static_cast<std::size_t>(cfg.P));
    out.h_paths.reserve(static_cast<std::size_t>(cfg.Q));

    const double g_scale = std::sqrt(static_cast<double>(cfg.M) * cfg.N / cfg.P);
    for (int p = 0; p < cfg.P; ++p) {
        PathAnglesG ang;
        ang.aoa_bs = rng.uniform(0.0, kTwoPi);
        ang.azimuth_ris = rng.uniform(0.0, kTwoPi);
        ang.elevation_ris = rng.uniform(0.0, kTwoPi);
        const cxd gain = rng.cnormal();
        out.g_paths.push_back(ang);
        out.g_gains.push_back(gain);
        const CVec a_bs = ula_response(cfg.M, ang.aoa_bs);
        const CVec a_ris = upa_response(cfg.N, ang.azimuth_ris, ang.elevation_ris);
        out.G.noalias() += (g_scale * gain) * (a_bs * a_ris.adjoint());
    }

    // The clustered mode confines the UE-RIS arrival angles; the RIS-BS
    // geometry stays unconstrained.
    const double h_scale = std::sqrt(static_cast<double>(cfg.N) / cfg.Q);
    for (int q = 0; q < cfg.Q; ++q) {
        PathAnglesH ang;
        ang.azimuth_ris = draw_angle(rng, clustered ? clusters : nullptr);
        ang.elevation_ris = draw_angle(rng, clustered ? clusters : nullptr);
        const cxd gain = rng.cnormal();
        out.h_paths.push_back(ang);
        out.h_gains.push_back(gain);
        out.h.noalias() += (h_scale * gain) * upa_response(cfg.N, ang.azimuth_ris, ang.elevation_ris);
    }
    return out;
}

CMat ccm_ground_truth(const ChannelRealization& real, const SystemConfig& cfg) {
    CMat R = CMat::Zero(cfg.N, cfg.N);
    const double scale = static_cast<double>(cfg.N) / cfg.Q;
    for (const auto& ang : real.h_paths) {
        const CVec a = upa_response(cfg.N, ang.azimuth_ris, ang.elevation_ris);
        R.noalias() += scale * (a * a.adjoint());
    }
    return R;
}

CMat ccm_from_d(const RVec& d) {
    require((d.array() >= 0.0).all(), "ccm_from_d: entries must be >= 0");
    const Eigen::Index n = d.size();
    const CMat& F = numerics::dft_matrix_cached(n);
    CMat R = F.adjoint() * d.asDiagonal() * F;
    return 0.5 * (R + CMat(R.adjoint()));
}

RVec angular_spectrum(const CMat& R_h) {
    require_dim(R_h.rows() == R_h.cols(), "angular_spectrum: matrix must be square");
    const Eigen::Index n = R_h.rows();
    const CMat& F = numerics::dft_matrix_cached(n);
    const CMat proj = F * R_h * F.adjoint();
    RVec d(n);
    const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    for (Eigen::Index i = 0; i < n; ++i) d(i) = std::max(0.0, std::real(proj(i, i)) * inv_n2);
    return d;
}

CVec sample_h_from_d(const RVec& d, RandomStream& rng) {
    require((d.array() >= 0.0).all(), "sample_h_from_d: entries must be >= 0");
    const Eigen::Index n = d.size();
    CVec z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = std::sqrt(d(i)) * rng.cnormal();
    const CMat& F = numerics::dft_matrix_cached(n);
    return F.adjoint() * z;
}

}  // namespace risvi::channel
