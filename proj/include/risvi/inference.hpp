#pragma once

#include <optional>
#include <vector>

#include "risvi/channel.hpp"
#include "risvi/elbo.hpp"
#include "risvi/encoder.hpp"
#include "risvi/signal.hpp"

namespace risvi::inference {

using channel::SystemConfig;
using signal::PilotPlan;

enum class EstimatorKind { JCE, JCCE };

struct TrainConfig {
    int dataset_size = 10000;
    int mc_samples = 1000;  // draws for the Laplace KL terms
    int l3_mc_samples = 8;  // joint draws for the JCCE likelihood
    double initial_lr = 0.1;
    int max_steps = 2000;
    int plateau_patience = 20;  // holdout evaluations without improvement
    int batch_size = 64;
    double holdout_frac = 0.1;
    int eval_every = 25;
    int max_lr_halvings = 8;
    int eval_mc_samples = 64;  // KL draws for holdout scoring
    int warmup_steps = 0;      // linear learning-rate ramp-in

    void validate() const;
};

// Output-head scaling constants; zero budget fields fall back to N and M*N.
struct HeadConfig {
    double c_mean_f = 3.0;
    double c_mean_g = 3.0;
    double c_b_f = 0.0;
    double c_b_g = 0.0;
    double kappa = 10.0;
};

// Everything needed to run one scenario's estimator end to end.
struct EncoderPair {
    EstimatorKind kind = EstimatorKind::JCE;
    SystemConfig cfg;
    PilotPlan plan;
    channel::ClusterSet clusters;
    HeadConfig heads;
    elbo::PriorParams priors;
    encoder::EncoderWeights F;
    encoder::EncoderWeights G;

    // JCCE only: the scenario's quasi-static RIS-BS channel. Training
    // windows and evaluation trials share it; only the user-side scene and
    // the noise are redrawn. It is what anchors the angular index frame --
    // with G free, (G T^H, cyclically shifted d) is an exact likelihood
    // tie and the spectrum's support would be unidentifiable.
    CMat static_G;
};

int encoder_input_dim(EstimatorKind kind, const SystemConfig& cfg);

// Fresh pair with scenario-derived pilot plan and Mode2 clusters. The same
// scenario stream always produces the same plan, clusters, and weights.
EncoderPair init_models(EstimatorKind kind, const SystemConfig& cfg, const HeadConfig& heads,
                        const elbo::PriorParams& priors, RandomStream& scenario_rng);

// One generated scenario dataset (signals plus the ground truth that
// produced them, kept for evaluation).
struct TrainingSet {
    EstimatorKind kind = EstimatorKind::JCE;
    std::vector<CMat> signals;  // Y (JCE) or Ytil (JCCE)
    std::vector<CVec> h_true;
    std::vector<CMat> G_true;
    std::vector<RVec> d_true;
};

TrainingSet generate_dataset(const EncoderPair& model, int count, RandomStream& scenario_rng,
                             int threads = 0);

struct CurvePoint {
    int step = 0;
    double train_loss = 0.0;
    double holdout_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    EncoderPair model;
    std::vector<CurvePoint> curve;
    double best_holdout = 0.0;
    int steps_run = 0;
};

// Amortized training: Adam on the summed ELBO losses with plateau-halved
// learning rate; returns the weights at the best holdout score.
TrainResult train_amortized(EstimatorKind kind, const SystemConfig& cfg, const TrainConfig& tc,
                            const HeadConfig& heads, const elbo::PriorParams& priors,
                            RandomStream& scenario_rng, int threads = 0,
                            const TrainingSet* dataset = nullptr);

struct EstimateJCE {
    CVec h_vir_hat;
    CMat G_vir_hat;
    CVec h_hat;
    CMat G_hat;
    RVec b;
    RMat B;
};

struct EstimateJCCE {
    RVec k;
    RVec d_hat;
    CMat G_vir_hat;
    CMat G_hat;
    CMat R_h_hat;
};

// MAP readout: means of the Laplace posteriors, d = max(k - 1, 0), and the
// inverse-DFT reconstructions back to the element domain.
EstimateJCE estimate_jce(const EncoderPair& model, const CMat& Y);
EstimateJCCE estimate_jcce(const EncoderPair& model, const CMat& Ytil);

// Spatial reconstructions shared by the estimators.
CVec h_from_angular(const CVec& h_vir);
CMat g_from_angular(const CMat& G_vir);

// Per-sample losses used by training and by the gradient acceptance checks.
struct BatchLoss {
    double value = 0.0;
    std::vector<RMat> upstream_f;  // per head, out x batch
    std::vector<RMat> upstream_g;
};

elbo::AuxParamsJCE aux_jce_from_heads(const std::vector<RVec>& f_out, const std::vector<RVec>& g_out,
                                      int M, int N);
elbo::AuxParamsJCCE aux_jcce_from_heads(const std::vector<RVec>& f_out, const std::vector<RVec>& g_out,
                                        int M, int N);

}  // namespace risvi::inference
