#pragma once

#include "risvi/channel.hpp"
#include "risvi/rng.hpp"
#include "risvi/types.hpp"

namespace risvi::signal {

using channel::SystemConfig;

// Per-pilot RIS configurations and pilot symbols. Phi is N x N_p with
// unit-modulus entries; all pilot symbols are 1.
struct PilotPlan {
    CMat Phi;
    CVec x;
};

// Random training plan: iid uniform phases per element and pilot.
PilotPlan make_pilot_plan(const SystemConfig& cfg, RandomStream& rng);

// Orthogonal alternative: Phi takes the first N_p columns of the N-point DFT
// matrix (requires N_p <= N); Phi * Phi^H = N * I when N_p = N.
PilotPlan make_pilot_plan_dft(const SystemConfig& cfg);

// Noiseless JCE mean signal sqrt(rho) * G * (Phi o (h x^T)).
CMat tx_signal_jce(const channel::ChannelRealization& real, const PilotPlan& plan, double rho);

// JCE uplink training block: Y = sqrt(rho) * G * (Phi o (h x^T)) + W with
// W entries iid CN(0,1). Y is M x N_p.
CMat rx_train_jce(const channel::ChannelRealization& real, const PilotPlan& plan, double rho,
                  RandomStream& rng);

// One noiseless JCCE block, sqrt(rho) * G * diag(h_s) * Phi.
CMat jcce_block_signal(const CMat& G, const CVec& h_s, const CMat& Phi, double rho);

// JCCE training window: for each of the N_b blocks draws h_s from the
// angular spectrum d, forms Y_s = sqrt(rho) G diag(h_s) Phi + W_s, and
// stacks vec(Y_s) as column s of the (M*N_p) x N_b result. Block s uses the
// child stream rng.child(s).
CMat rx_train_jcce(const CMat& G, const RVec& d, const PilotPlan& plan, const SystemConfig& cfg,
                   RandomStream& rng);

// Model covariance of one stacked JCCE observation:
// R = rho * (Phi^T kr G) ccm_from_d(d) (Phi^T kr G)^H + I.
CMat rx_cov_model(const CMat& G, const CMat& Phi, const RVec& d, double rho);

// Network input statistic for JCCE: Ytil * Ytil^H / N_b - I.
CMat preprocess_jcce(const CMat& Ytil, int N_b);

}  // namespace risvi::signal
