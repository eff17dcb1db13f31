#pragma once

#include <vector>

#include "risvi/channel.hpp"
#include "risvi/rng.hpp"
#include "risvi/signal.hpp"
#include "risvi/types.hpp"
#include "risvi/vardist.hpp"

namespace risvi::elbo {

using channel::SystemConfig;
using signal::PilotPlan;

struct PriorParams {
    double alpha_h = 1.0;
    double alpha_G = 1.0;
    double alpha_d = 1.0;
};

// Variational parameters of the JCE posteriors: per-element complex Laplace
// on h^vir (m, b) and on G^vir (Mm, B). Scales are floored at 1e-6.
struct AuxParamsJCE {
    CVec m;
    RVec b;
    CMat Mm;
    RMat B;
};

// Gradients; complex entries follow the d/dRe + j d/dIm convention.
struct GradJCE {
    CVec m;
    RVec b;
    CMat Mm;
    RMat B;

    static GradJCE zero(Eigen::Index M, Eigen::Index N);
    void accumulate(const GradJCE& other, double weight = 1.0);
};

struct AuxParamsJCCE {
    RVec k;   // Gamma shapes for d
    CMat Mm;  // Laplace means for G^vir
    RMat B;   // Laplace scales for G^vir
};

struct GradJCCE {
    RVec k;
    CMat Mm;
    RMat B;

    static GradJCCE zero(Eigen::Index M, Eigen::Index N);
    void accumulate(const GradJCCE& other, double weight = 1.0);
};

inline constexpr double kScaleFloor = 1e-6;

// --- JCE losses ---

struct KlTerm {
    double value = 0.0;
    CVec g_mean;   // same length as the flattened mean
    RVec g_scale;
};

// Complex-Laplace KL against the CL(0, alpha) prior, Monte-Carlo with D
// draws per element:
//   (1/D) sum_i sum_d |m_i + b_i z| / alpha - sum_i log(2 pi b_i^2)
//   + n log(2 pi alpha^2) - 2 n.
KlTerm cl_kl_mc(const CVec& m, const RVec& b, double alpha, int D, RandomStream& rng);

// Deterministic core with the standard draws supplied (element i uses row i
// of zeta); used by the finite-difference oracles.
KlTerm cl_kl_fixed(const CVec& m, const RVec& b, double alpha, const CMat& zeta);

struct L1Jce {
    double value = 0.0;
    CVec g_m;
    RVec g_b;
};

struct L2Jce {
    double value = 0.0;
    CMat g_Mm;
    RMat g_B;
};

L1Jce l1_icsi(const AuxParamsJCE& p, const PriorParams& prior, int D, RandomStream& rng);
L2Jce l2_icsi(const AuxParamsJCE& p, const PriorParams& prior, int D, RandomStream& rng);

// Precomputed pilot-plan algebra shared by every JCE loss evaluation:
// X_l = F_N^H diag(v_l) F_N^H and the elementwise |X_l|^2.
struct JcePrecomp {
    int M = 0, N = 0, N_p = 0;
    CMat F_M;
    CVec x;  // pilot symbols
    std::vector<CMat> X;
    std::vector<RMat> Xabs2;
};

JcePrecomp make_jce_precomp(const PilotPlan& plan, int M);

struct L3Jce {
    double value = 0.0;
    CVec g_m;
    RVec g_b;
    CMat g_Mm;
    RMat g_B;
};

// Closed-form expectation of the reconstruction loss (constant dropped),
// with Lambda = 6 diag(b^2) and Q = 6 diag(sum_m B_{m,.}^2).
L3Jce l3_icsi_closed(const AuxParamsJCE& p, const CMat& Y, const JcePrecomp& pre, double rho);
L3Jce l3_icsi_closed(const AuxParamsJCE& p, const CMat& Y, const PilotPlan& plan, double rho);

struct JceLoss {
    double value = 0.0;
    double l1 = 0.0, l2 = 0.0, l3 = 0.0;
    GradJCE grad;
};

JceLoss jce_total_loss(const AuxParamsJCE& p, const CMat& Y, const JcePrecomp& pre, double rho,
                       const PriorParams& prior, int D, RandomStream& rng);

// Fully deterministic variant for gradient oracles.
struct JceNoise {
    CMat zeta_h;  // N x D
    CMat zeta_G;  // (M*N) x D, row index = column-major element index
};
JceNoise draw_jce_noise(Eigen::Index M, Eigen::Index N, int D, RandomStream& rng);
JceLoss jce_total_loss_fixed(const AuxParamsJCE& p, const CMat& Y, const JcePrecomp& pre, double rho,
                             const PriorParams& prior, const JceNoise& noise);

// --- JCCE losses ---

struct L1Scsi {
    double value = 0.0;
    RVec g_k;
};

L1Scsi l1_scsi(const RVec& k, double alpha_d, vardist::KlMode mode = vardist::KlMode::Analytic);

// Randomness of one Monte-Carlo likelihood sample. `u` (the CDF values of
// the gamma draws) is optional: when present the evaluation goes through the
// quantile so finite differences in k stay on common random numbers.
struct JcceNoise {
    RVec x;      // gamma draws at the nominal shapes
    RVec dxdk;   // implicit derivatives at the nominal shapes
    RVec u;      // empty unless requested
    CMat zeta;   // M x N standard complex-Laplace draws
};

JcceNoise draw_jcce_noise(const RVec& k, Eigen::Index M, RandomStream& rng, bool with_u = false);

struct L3Scsi {
    double value = 0.0;
    RVec g_k;
    CMat g_Mm;
    RMat g_B;
};

// One fixed-noise sample of E[Tr(Ytil^H R^-1 Ytil) + N_b log|R|] with
// R = rho * (Phi^T kr G) R_h(d) (Phi^T kr G)^H + I; constant dropped.
L3Scsi l3_scsi_sample(const AuxParamsJCCE& p, const CMat& Ytil, const PilotPlan& plan,
                      const SystemConfig& cfg, const JcceNoise& noise, bool via_quantile = false);

// Monte-Carlo average over S joint draws.
L3Scsi l3_scsi(const AuxParamsJCCE& p, const CMat& Ytil, const PilotPlan& plan,
               const SystemConfig& cfg, int S, RandomStream& rng);

struct JcceLoss {
    double value = 0.0;
    double l1 = 0.0, l2 = 0.0, l3 = 0.0;
    GradJCCE grad;
};

JcceLoss jcce_total_loss(const AuxParamsJCCE& p, const CMat& Ytil, const PilotPlan& plan,
                         const SystemConfig& cfg, const PriorParams& prior, int D, int S,
                         RandomStream& rng, vardist::KlMode kl_mode = vardist::KlMode::Analytic);

JcceLoss jcce_total_loss_fixed(const AuxParamsJCCE& p, const CMat& Ytil, const PilotPlan& plan,
                               const SystemConfig& cfg, const PriorParams& prior, const JceNoise& kl_noise,
                               const std::vector<JcceNoise>& l3_noise,
                               vardist::KlMode kl_mode = vardist::KlMode::Analytic);

}  // namespace risvi::elbo
