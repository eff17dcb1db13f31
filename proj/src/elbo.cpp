#include "risvi/elbo.hpp"

#include <cmath>

#include "risvi/numerics.hpp"

namespace risvi::elbo {

using numerics::CholeskyFactor;
using numerics::dft_matrix_cached;
using numerics::khatri_rao;

GradJCE GradJCE::zero(Eigen::Index M, Eigen::Index N) {
    GradJCE g;
    g.m = CVec::Zero(N);
    g.b = RVec::Zero(N);
    g.Mm = CMat::Zero(M, N);
    g.B = RMat::Zero(M, N);
    return g;
}

void GradJCE::accumulate(const GradJCE& other, double weight) {
    m += weight * other.m;
    b += weight * other.b;
    Mm += weight * other.Mm;
    B += weight * other.B;
}

GradJCCE GradJCCE::zero(Eigen::Index M, Eigen::Index N) {
    GradJCCE g;
    g.k = RVec::Zero(N);
    g.Mm = CMat::Zero(M, N);
    g.B = RMat::Zero(M, N);
    return g;
}

void GradJCCE::accumulate(const GradJCCE& other, double weight) {
    k += weight * other.k;
    Mm += weight * other.Mm;
    B += weight * other.B;
}

namespace {

double floored(double b) { return std::max(b, kScaleFloor); }

// Shared core for the complex-Laplace KL terms; element i consumes the
// draws supplied by fetch(i, d).
template <typename Fetch>
KlTerm cl_kl_core(const CVec& m, const RVec& b, double alpha, int D, Fetch&& fetch) {
    require(alpha > 0.0, "cl_kl: prior scale must be > 0");
    require(D >= 1, "cl_kl: sample count must be >= 1");
    const Eigen::Index n = m.size();
    require_dim(b.size() == n, "cl_kl: mean/scale size mismatch");

    KlTerm out;
    out.g_mean = CVec::Zero(n);
    out.g_scale = RVec::Zero(n);
    const double inv_Da = 1.0 / (static_cast<double>(D) * alpha);
    double mc = 0.0;
    double logs = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double bi = floored(b(i));
        cxd gm(0.0, 0.0);
        double gb = 0.0;
        double acc = 0.0;
        for (int d = 0; d < D; ++d) {
            const cxd zeta = fetch(i, d);
            const cxd z = m(i) + bi * zeta;
            const double r = std::abs(z);
            acc += r;
            if (r > 0.0) {
                const cxd dir = z / r;
                gm += dir;
                gb += std::real(std::conj(dir) * zeta);
            }
        }
        mc += acc * inv_Da;
        logs += std::log(kTwoPi * bi * bi);
        out.g_mean(i) = gm * inv_Da;
        out.g_scale(i) = b(i) > kScaleFloor ? gb * inv_Da - 2.0 / bi : 0.0;
    }
    out.value = mc - logs + static_cast<double>(n) * std::log(kTwoPi * alpha * alpha) - 2.0 * n;
    return out;
}

}  // namespace

KlTerm cl_kl_mc(const CVec& m, const RVec& b, double alpha, int D, RandomStream& rng) {
    return cl_kl_core(m, b, alpha, D,
                      [&rng](Eigen::Index, int) { return vardist::cl_standard_sample(rng); });
}

KlTerm cl_kl_fixed(const CVec& m, const RVec& b, double alpha, const CMat& zeta) {
    require_dim(zeta.rows() == m.size() && zeta.cols() >= 1, "cl_kl_fixed: noise shape mismatch");
    return cl_kl_core(m, b, alpha, static_cast<int>(zeta.cols()),
                      [&zeta](Eigen::Index i, int d) { return zeta(i, d); });
}

L1Jce l1_icsi(const AuxParamsJCE& p, const PriorParams& prior, int D, RandomStream& rng) {
    const KlTerm t = cl_kl_mc(p.m, p.b, prior.alpha_h, D, rng);
    return {t.value, t.g_mean, t.g_scale};
}

L2Jce l2_icsi(const AuxParamsJCE& p, const PriorParams& prior, int D, RandomStream& rng) {
    const Eigen::Index M = p.Mm.rows(), N = p.Mm.cols();
    const Eigen::Map<const CVec> m_flat(p.Mm.data(), M * N);
    const Eigen::Map<const RVec> b_flat(p.B.data(), M * N);
    const KlTerm t = cl_kl_mc(m_flat, b_flat, prior.alpha_G, D, rng);
    L2Jce out;
    out.value = t.value;
    out.g_Mm = Eigen::Map<const CMat>(t.g_mean.data(), M, N);
    out.g_B = Eigen::Map<const RMat>(t.g_scale.data(), M, N);
    return out;
}

JcePrecomp make_jce_precomp(const PilotPlan& plan, int M) {
    JcePrecomp pre;
    pre.M = M;
    pre.N = static_cast<int>(plan.Phi.rows());
    pre.N_p = static_cast<int>(plan.Phi.cols());
    pre.F_M = numerics::dft_matrix(M);
    pre.x = plan.x;
    const CMat& F_N = dft_matrix_cached(pre.N);
    const CMat F_N_H = F_N.adjoint();
    pre.X.reserve(static_cast<std::size_t>(pre.N_p));
    pre.Xabs2.reserve(static_cast<std::size_t>(pre.N_p));
    for (int l = 0; l < pre.N_p; ++l) {
        CMat X = F_N_H * plan.Phi.col(l).asDiagonal() * F_N_H;
        pre.Xabs2.push_back(X.cwiseAbs2());
        pre.X.push_back(std::move(X));
    }
    return pre;
}

L3Jce l3_icsi_closed(const AuxParamsJCE& p, const CMat& Y, const JcePrecomp& pre, double rho) {
    const Eigen::Index M = pre.M, N = pre.N, N_p = pre.N_p;
    require_dim(Y.rows() == M && Y.cols() == N_p, "l3_icsi_closed: Y shape mismatch");
    require_dim(p.m.size() == N && p.b.size() == N && p.Mm.rows() == M && p.Mm.cols() == N &&
                    p.B.rows() == M && p.B.cols() == N,
                "l3_icsi_closed: parameter shape mismatch");

    L3Jce out;
    out.g_m = CVec::Zero(N);
    out.g_b = RVec::Zero(N);
    out.g_Mm = CMat::Zero(M, N);
    out.g_B = RMat::Zero(M, N);

    const RVec bf = p.b.cwiseMax(kScaleFloor);
    const RMat Bf = p.B.cwiseMax(kScaleFloor);
    const RVec lambda = 6.0 * bf.cwiseProduct(bf);
    const RVec q = 6.0 * Bf.cwiseAbs2().colwise().sum().transpose();

    const double Nd = static_cast<double>(N);
    const double prefactor = std::sqrt(rho) / (static_cast<double>(M) * Nd * Nd);
    const double c_base = rho / (static_cast<double>(M) * Nd * Nd * Nd * Nd);

    RVec g_lambda = RVec::Zero(N);
    RVec g_q = RVec::Zero(N);

    for (Eigen::Index l = 0; l < N_p; ++l) {
        const CMat& X = pre.X[l];
        const RMat& P2 = pre.Xabs2[l];
        const cxd s = prefactor * pre.x(l);
        const double c = c_base * std::norm(pre.x(l));

        const CVec u = X * p.m;
        const RVec uabs2 = u.cwiseAbs2();
        const CMat W = p.Mm * X;
        const CVec wv = W * p.m;
        const CVec r = Y.col(l) - s * (pre.F_M.adjoint() * wv);

        const RVec colsum = P2.transpose() * q;
        const RVec rowsum = P2 * lambda;
        RVec wcol2(N);
        for (Eigen::Index i = 0; i < N; ++i) wcol2(i) = W.col(i).squaredNorm();

        out.value += r.squaredNorm() + c * (lambda.dot(colsum) + lambda.dot(wcol2) + q.dot(uabs2));

        const CVec Fr = pre.F_M * r;
        out.g_m.noalias() += (-2.0 * std::conj(s)) * (X.adjoint() * (p.Mm.adjoint() * Fr));
        out.g_Mm.noalias() += (-2.0 * std::conj(s)) * (Fr * u.adjoint());

        g_lambda += c * (colsum + wcol2);
        g_q += c * (rowsum + uabs2);

        const CVec qu = q.cast<cxd>().cwiseProduct(u);
        out.g_m.noalias() += (2.0 * c) * (X.adjoint() * qu);
        out.g_Mm.noalias() += (2.0 * c) * (W * lambda.asDiagonal() * X.adjoint());
    }

    for (Eigen::Index i = 0; i < N; ++i) {
        out.g_b(i) = p.b(i) > kScaleFloor ? 12.0 * bf(i) * g_lambda(i) : 0.0;
    }
    for (Eigen::Index j = 0; j < N; ++j) {
        for (Eigen::Index i = 0; i < M; ++i) {
            out.g_B(i, j) = p.B(i, j) > kScaleFloor ? 12.0 * Bf(i, j) * g_q(j) : 0.0;
        }
    }
    return out;
}

L3Jce l3_icsi_closed(const AuxParamsJCE& p, const CMat& Y, const PilotPlan& plan, double rho) {
    return l3_icsi_closed(p, Y, make_jce_precomp(plan, static_cast<int>(Y.rows())), rho);
}

JceNoise draw_jce_noise(Eigen::Index M, Eigen::Index N, int D, RandomStream& rng) {
    JceNoise noise;
    noise.zeta_h.resize(N, D);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (int d = 0; d < D; ++d) noise.zeta_h(i, d) = vardist::cl_standard_sample(rng);
    }
    noise.zeta_G.resize(M * N, D);
    for (Eigen::Index i = 0; i < M * N; ++i) {
        for (int d = 0; d < D; ++d) noise.zeta_G(i, d) = vardist::cl_standard_sample(rng);
    }
    return noise;
}

JceLoss jce_total_loss(const AuxParamsJCE& p, const CMat& Y, const JcePrecomp& pre, double rho,
                       const PriorParams& prior, int D, RandomStream& rng) {
    JceLoss loss;
    loss.grad = GradJCE::zero(p.Mm.rows(), p.Mm.cols());

    RandomStream l1_rng = rng.child("l1");
    RandomStream l2_rng = rng.child("l2");
    const L1Jce l1 = l1_icsi(p, prior, D, l1_rng);
    const L2Jce l2 = l2_icsi(p, prior, D, l2_rng);
    const L3Jce l3 = l3_icsi_closed(p, Y, pre, rho);

    loss.l1 = l1.value;
    loss.l2 = l2.value;
    loss.l3 = l3.value;
    loss.value = l1.value + l2.value + l3.value;
    loss.grad.m = l1.g_m + l3.g_m;
    loss.grad.b = l1.g_b + l3.g_b;
    loss.grad.Mm = l2.g_Mm + l3.g_Mm;
    loss.grad.B = l2.g_B + l3.g_B;
    return loss;
}

JceLoss jce_total_loss_fixed(const AuxParamsJCE& p, const CMat& Y, const JcePrecomp& pre, double rho,
                             const PriorParams& prior, const JceNoise& noise) {
    JceLoss loss;
    loss.grad = GradJCE::zero(p.Mm.rows(), p.Mm.cols());

    const KlTerm l1 = cl_kl_fixed(p.m, p.b, prior.alpha_h, noise.zeta_h);
    const Eigen::Index M = p.Mm.rows(), N = p.Mm.cols();
    const Eigen::Map<const CVec> m_flat(p.Mm.data(), M * N);
    const Eigen::Map<const RVec> b_flat(p.B.data(), M * N);
    const KlTerm l2 = cl_kl_fixed(m_flat, b_flat, prior.alpha_G, noise.zeta_G);
    const L3Jce l3 = l3_icsi_closed(p, Y, pre, rho);

    loss.l1 = l1.value;
    loss.l2 = l2.value;
    loss.l3 = l3.value;
    loss.value = l1.value + l2.value + l3.value;
    loss.grad.m = l1.g_mean + l3.g_m;
    loss.grad.b = l1.g_scale + l3.g_b;
    loss.grad.Mm = Eigen::Map<const CMat>(l2.g_mean.data(), M, N) + l3.g_Mm;
    loss.grad.B = Eigen::Map<const RMat>(l2.g_scale.data(), M, N) + l3.g_B;
    return loss;
}

L1Scsi l1_scsi(const RVec& k, double alpha_d, vardist::KlMode mode) {
    L1Scsi out;
    out.g_k = RVec::Zero(k.size());
    for (Eigen::Index i = 0; i < k.size(); ++i) {
        out.value += vardist::kl_gamma_exp(k(i), alpha_d, mode);
        out.g_k(i) = vardist::kl_gamma_exp_grad_k(k(i), alpha_d, mode);
    }
    return out;
}

JcceNoise draw_jcce_noise(const RVec& k, Eigen::Index M, RandomStream& rng, bool with_u) {
    const Eigen::Index N = k.size();
    JcceNoise noise;
    noise.x.resize(N);
    noise.dxdk.resize(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto s = vardist::gamma_sample_implicit(k(i), rng);
        noise.x(i) = s.x;
        noise.dxdk(i) = s.dxdk;
    }
    if (with_u) {
        noise.u.resize(N);
        for (Eigen::Index i = 0; i < N; ++i) noise.u(i) = vardist::reg_lower_gamma(k(i), noise.x(i));
    }
    noise.zeta.resize(M, N);
    for (Eigen::Index j = 0; j < N; ++j) {
        for (Eigen::Index i = 0; i < M; ++i) noise.zeta(i, j) = vardist::cl_standard_sample(rng);
    }
    return noise;
}

L3Scsi l3_scsi_sample(const AuxParamsJCCE& p, const CMat& Ytil, const PilotPlan& plan,
                      const SystemConfig& cfg, const JcceNoise& noise, bool via_quantile) {
    const Eigen::Index M = cfg.M, N = cfg.N, N_p = cfg.N_p;
    const Eigen::Index rows = M * N_p;
    const Eigen::Index blocks = Ytil.cols();
    require_dim(Ytil.rows() == rows, "l3_scsi_sample: Ytil shape mismatch");
    require_dim(p.k.size() == N && p.Mm.rows() == M && p.Mm.cols() == N,
                "l3_scsi_sample: parameter shape mismatch");

    RVec d(N), dxdk(N);
    if (via_quantile) {
        require_dim(noise.u.size() == N, "l3_scsi_sample: quantile path needs stored uniforms");
        for (Eigen::Index i = 0; i < N; ++i) {
            d(i) = vardist::gamma_quantile(p.k(i), noise.u(i));
            dxdk(i) = vardist::gamma_dxdk(p.k(i), d(i));
        }
    } else {
        d = noise.x;
        dxdk = noise.dxdk;
    }

    const RMat Bf = p.B.cwiseMax(kScaleFloor);
    CMat Gvir(M, N);
    for (Eigen::Index j = 0; j < N; ++j) {
        for (Eigen::Index i = 0; i < M; ++i) Gvir(i, j) = p.Mm(i, j) + Bf(i, j) * noise.zeta(i, j);
    }

    const CMat& F_M = dft_matrix_cached(M);
    const CMat& F_N = dft_matrix_cached(N);
    const double inv_MN = 1.0 / (static_cast<double>(M) * N);
    const CMat G = inv_MN * (F_M.adjoint() * Gvir * F_N.adjoint());

    const CMat A = khatri_rao(plan.Phi.transpose(), G);
    // the Gamma draws parameterize the spectrum in the unitary-DFT scale,
    // so the covariance model uses F_N^H/sqrt(N) on both sides
    const CMat At = (1.0 / std::sqrt(static_cast<double>(N))) * (A * F_N.adjoint());
    CMat R = cfg.rho * (At * d.asDiagonal() * At.adjoint());
    R += CMat::Identity(rows, rows);
    R = 0.5 * (R + CMat(R.adjoint()));

    const CholeskyFactor fac(R);
    const CMat Z = fac.solve(Ytil);

    L3Scsi out;
    out.value = (Ytil.conjugate().cwiseProduct(Z)).sum().real() +
                static_cast<double>(blocks) * fac.logdet();

    const CMat identity = CMat::Identity(rows, rows);
    const CMat Rinv = fac.solve(identity);
    const CMat D_mat = static_cast<double>(blocks) * Rinv - Z * Z.adjoint();

    const CMat DAt = D_mat * At;
    const CMat T = At.adjoint() * DAt;
    out.g_k = cfg.rho * T.diagonal().real().cwiseProduct(dxdk);

    const CMat G_At = (2.0 * cfg.rho) * (DAt * d.asDiagonal());
    const CMat G_A = (1.0 / std::sqrt(static_cast<double>(N))) * (G_At * F_N);
    CMat G_G(M, N);
    for (Eigen::Index kcol = 0; kcol < N; ++kcol) {
        for (Eigen::Index i = 0; i < M; ++i) {
            cxd acc(0, 0);
            for (Eigen::Index l = 0; l < N_p; ++l) {
                acc += G_A(l * M + i, kcol) * std::conj(plan.Phi(kcol, l));
            }
            G_G(i, kcol) = acc;
        }
    }
    const CMat G_Gvir = inv_MN * (F_M * G_G * F_N);
    out.g_Mm = G_Gvir;
    out.g_B = G_Gvir.cwiseProduct(noise.zeta.conjugate()).real();
    for (Eigen::Index j = 0; j < N; ++j) {
        for (Eigen::Index i = 0; i < M; ++i) {
            if (p.B(i, j) <= kScaleFloor) out.g_B(i, j) = 0.0;
        }
    }
    return out;
}

L3Scsi l3_scsi(const AuxParamsJCCE& p, const CMat& Ytil, const PilotPlan& plan,
               const SystemConfig& cfg, int S, RandomStream& rng) {
    require(S >= 1, "l3_scsi: sample count must be >= 1");
    L3Scsi acc;
    acc.g_k = RVec::Zero(p.k.size());
    acc.g_Mm = CMat::Zero(p.Mm.rows(), p.Mm.cols());
    acc.g_B = RMat::Zero(p.B.rows(), p.B.cols());
    const double w = 1.0 / static_cast<double>(S);
    for (int s = 0; s < S; ++s) {
        RandomStream sub = rng.child(static_cast<std::uint64_t>(s));
        const JcceNoise noise = draw_jcce_noise(p.k, p.Mm.rows(), sub);
        L3Scsi one;
        try {
            one = l3_scsi_sample(p, Ytil, plan, cfg, noise);
        } catch (const numerical_error& e) {
            throw numerical_error(std::string(e.what()) + " (MC sample " + std::to_string(s) + ")");
        }
        acc.value += w * one.value;
        acc.g_k += w * one.g_k;
        acc.g_Mm += w * one.g_Mm;
        acc.g_B += w * one.g_B;
    }
    return acc;
}

JcceLoss jcce_total_loss(const AuxParamsJCCE& p, const CMat& Ytil, const PilotPlan& plan,
                         const SystemConfig& cfg, const PriorParams& prior, int D, int S,
                         RandomStream& rng, vardist::KlMode kl_mode) {
    JcceLoss loss;
    loss.grad = GradJCCE::zero(p.Mm.rows(), p.Mm.cols());

    const L1Scsi l1 = l1_scsi(p.k, prior.alpha_d, kl_mode);
    const Eigen::Index M = p.Mm.rows(), N = p.Mm.cols();
    const Eigen::Map<const CVec> m_flat(p.Mm.data(), M * N);
    const Eigen::Map<const RVec> b_flat(p.B.data(), M * N);
    RandomStream l2_rng = rng.child("l2");
    const KlTerm l2 = cl_kl_mc(m_flat, b_flat, prior.alpha_G, D, l2_rng);
    RandomStream l3_rng = rng.child("l3");
    const L3Scsi l3 = l3_scsi(p, Ytil, plan, cfg, S, l3_rng);

    loss.l1 = l1.value;
    loss.l2 = l2.value;
    loss.l3 = l3.value;
    loss.value = l1.value + l2.value + l3.value;
    loss.grad.k = l1.g_k + l3.g_k;
    loss.grad.Mm = Eigen::Map<const CMat>(l2.g_mean.data(), M, N) + l3.g_Mm;
    loss.grad.B = Eigen::Map<const RMat>(l2.g_scale.data(), M, N) + l3.g_B;
    return loss;
}

JcceLoss jcce_total_loss_fixed(const AuxParamsJCCE& p, const CMat& Ytil, const PilotPlan& plan,
                               const SystemConfig& cfg, const PriorParams& prior, const JceNoise& kl_noise,
                               const std::vector<JcceNoise>& l3_noise, vardist::KlMode kl_mode) {
    require(!l3_noise.empty(), "jcce_total_loss_fixed: need at least one likelihood sample");
    JcceLoss loss;
    loss.grad = GradJCCE::zero(p.Mm.rows(), p.Mm.cols());

    const L1Scsi l1 = l1_scsi(p.k, prior.alpha_d, kl_mode);
    const Eigen::Index M = p.Mm.rows(), N = p.Mm.cols();
    const Eigen::Map<const CVec> m_flat(p.Mm.data(), M * N);
    const Eigen::Map<const RVec> b_flat(p.B.data(), M * N);
    const KlTerm l2 = cl_kl_fixed(m_flat, b_flat, prior.alpha_G, kl_noise.zeta_G);

    loss.l1 = l1.value;
    loss.l2 = l2.value;
    loss.grad.k = l1.g_k;
    loss.grad.Mm = Eigen::Map<const CMat>(l2.g_mean.data(), M, N);
    loss.grad.B = Eigen::Map<const RMat>(l2.g_scale.data(), M, N);
    const double w = 1.0 / static_cast<double>(l3_noise.size());
    for (const auto& noise : l3_noise) {
        const L3Scsi one = l3_scsi_sample(p, Ytil, plan, cfg, noise, /*via_quantile=*/true);
        loss.l3 += w * one.value;
        loss.grad.k += w * one.g_k;
        loss.grad.Mm += w * one.g_Mm;
        loss.grad.B += w * one.g_B;
    }
    loss.value = loss.l1 + loss.l2 + loss.l3;
    return loss;
}

}  // namespace risvi::elbo
