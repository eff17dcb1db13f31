#include "risvi/signal.hpp"

#include <cmath>

#include "risvi/numerics.hpp"

namespace risvi::signal {

PilotPlan make_pilot_plan(const SystemConfig& cfg, RandomStream& rng) {
    cfg.validate();
    PilotPlan plan;
    plan.Phi.resize(cfg.N, cfg.N_p);
    for (Eigen::Index l = 0; l < cfg.N_p; ++l) {
        for (Eigen::Index i = 0; i < cfg.N; ++i) {
            const double theta = rng.uniform(0.0, kTwoPi);
            plan.Phi(i, l) = cxd(std::cos(theta), std::sin(theta));
        }
    }
    plan.x = CVec::Ones(cfg.N_p);
    return plan;
}

PilotPlan make_pilot_plan_dft(const SystemConfig& cfg) {
    cfg.validate();
    require_dim(cfg.N_p <= cfg.N, "make_pilot_plan_dft: needs N_p <= N");
    PilotPlan plan;
    plan.Phi = numerics::dft_matrix(cfg.N).leftCols(cfg.N_p);
    plan.x = CVec::Ones(cfg.N_p);
    return plan;
}

CMat tx_signal_jce(const channel::ChannelRealization& real, const PilotPlan& plan, double rho) {
    const Eigen::Index M = real.G.rows();
    const Eigen::Index N = real.G.cols();
    const Eigen::Index N_p = plan.Phi.cols();
    require_dim(plan.Phi.rows() == N && real.h.size() == N, "tx_signal_jce: dimension mismatch");
    // Phi o (h x^T) has column l equal to v_l o h * x_l
    CMat Y(M, N_p);
    const double amp = std::sqrt(rho);
    for (Eigen::Index l = 0; l < N_p; ++l) {
        const CVec mod = plan.Phi.col(l).cwiseProduct(real.h) * plan.x(l);
        Y.col(l) = amp * (real.G * mod);
    }
    return Y;
}

CMat rx_train_jce(const channel::ChannelRealization& real, const PilotPlan& plan, double rho,
                  RandomStream& rng) {
    CMat Y = tx_signal_jce(real, plan, rho);
    for (Eigen::Index l = 0; l < Y.cols(); ++l) {
        for (Eigen::Index i = 0; i < Y.rows(); ++i) Y(i, l) += rng.cnormal();
    }
    return Y;
}

CMat jcce_block_signal(const CMat& G, const CVec& h_s, const CMat& Phi, double rho) {
    require_dim(G.cols() == h_s.size() && G.cols() == Phi.rows(),
                "jcce_block_signal: dimension mismatch");
    return std::sqrt(rho) * (G * h_s.asDiagonal() * Phi);
}

CMat rx_train_jcce(const CMat& G, const RVec& d, const PilotPlan& plan, const SystemConfig& cfg,
                   RandomStream& rng) {
    require_dim(G.rows() == cfg.M && G.cols() == cfg.N, "rx_train_jcce: G dimension mismatch");
    require_dim(d.size() == cfg.N, "rx_train_jcce: d dimension mismatch");
    require_dim(plan.Phi.rows() == cfg.N && plan.Phi.cols() == cfg.N_p,
                "rx_train_jcce: plan dimension mismatch");
    const Eigen::Index rows = static_cast<Eigen::Index>(cfg.M) * cfg.N_p;
    CMat Ytil(rows, cfg.N_b);
    for (int s = 0; s < cfg.N_b; ++s) {
        RandomStream block = rng.child(static_cast<std::uint64_t>(s));
        const CVec h_s = channel::sample_h_from_d(d, block);
        const CMat Y_s = jcce_block_signal(G, h_s, plan.Phi, cfg.rho);
        for (Eigen::Index l = 0; l < cfg.N_p; ++l) {
            for (Eigen::Index i = 0; i < cfg.M; ++i) {
                Ytil(l * cfg.M + i, s) = Y_s(i, l) + block.cnormal();
            }
        }
    }
    return Ytil;
}

CMat rx_cov_model(const CMat& G, const CMat& Phi, const RVec& d, double rho) {
    require_dim(G.cols() == Phi.rows(), "rx_cov_model: G/Phi mismatch");
    require_dim(d.size() == G.cols(), "rx_cov_model: d dimension mismatch");
    const CMat A = numerics::khatri_rao(Phi.transpose(), G);
    const CMat R_h = channel::ccm_from_d(d);
    const Eigen::Index n = A.rows();
    CMat R = rho * (A * R_h * A.adjoint());
    R += CMat::Identity(n, n);
    return 0.5 * (R + CMat(R.adjoint()));
}

CMat preprocess_jcce(const CMat& Ytil, int N_b) {
    require_dim(N_b >= 1 && Ytil.cols() == N_b, "preprocess_jcce: N_b mismatch");
    const Eigen::Index n = Ytil.rows();
    CMat S = (Ytil * Ytil.adjoint()) / static_cast<double>(N_b);
    S -= CMat::Identity(n, n);
    return 0.5 * (S + CMat(S.adjoint()));
}

}  // namespace risvi::signal
