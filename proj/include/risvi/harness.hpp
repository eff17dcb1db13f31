#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "risvi/inference.hpp"
#include "risvi/phaseopt.hpp"

namespace risvi::harness {

using channel::SystemConfig;

enum class Method { JCE, JCCE, PerfectCsi, PcPcov, RandomPhase };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct MetricRecord {
    std::string scenario;
    double snr_db = 0.0;
    int trial = 0;
    Method method = Method::PerfectCsi;
    double capacity = 0.0;
    std::optional<double> effective_capacity;
    std::optional<double> nmse_h;
    std::optional<double> nmse_G;
    std::optional<double> nmse_d;
    std::optional<double> eig_alignment;
};

// ||est - truth||^2 / ||truth||^2; the truth must be nonzero.
double nmse(const CVec& est, const CVec& truth);
double nmse(const CMat& est, const CMat& truth);
double nmse(const RVec& est, const RVec& truth);

// (1 - alpha) * C with alpha in [0, 1].
double effective_capacity(double capacity, double alpha);

enum class Scheme { JCE, JCCE };

struct ProtocolSpec {
    double T_G_ms = 100.0;
    double T_h_ms = 0.1;
    int slots_per_block = 40;
    Scheme scheme = Scheme::JCE;
};

// Pilot fraction of the transmission budget. JCE re-trains every UE-RIS
// coherence block; JCCE spends N_p * N_b pilot slots once per RIS-BS window
// of floor(T_G / T_h) blocks.
double overhead_fraction(const ProtocolSpec& p, int N_p, int N_b);
double overhead_fraction(const ProtocolSpec& p, const SystemConfig& cfg);

// |<top eigenvector, top eigenvector>| for Hermitian inputs; non-square or
// non-Hermitian inputs use the dominant right singular vector instead.
double eig_alignment(const CMat& A_hat, const CMat& A_ref);

enum class FlopModel { JCE, JCCE };
enum class FlopEncoder { F, G };

// Inference FLOP counts of the encoder networks as a function of the
// scenario dimensions.
long long flop_count(FlopModel model, FlopEncoder enc, long long M, long long N, long long N_p);

// One scenario of a Monte-Carlo sweep. Learned methods need a trained model
// per SNR point (keys are dB values as written in the config).
struct SweepScenario {
    std::string id;
    SystemConfig cfg;
    signal::PilotPlan plan;
    channel::ClusterSet clusters;
    ProtocolSpec protocol;
    std::map<double, const inference::EncoderPair*> jce_models;
    std::map<double, const inference::EncoderPair*> jcce_models;
};

// Per (scenario, snr, trial): draws a channel, simulates training, runs the
// requested estimators, configures phases, and scores capacity plus the
// estimation metrics. Statistical-CSI methods are scored on a fresh h drawn
// from the same covariance; instantaneous methods on the estimation h.
std::vector<MetricRecord> run_sweep(const std::vector<SweepScenario>& scenarios,
                                    const std::vector<double>& snr_db, int trials,
                                    const std::vector<Method>& methods, RandomStream& rng,
                                    int threads = 0);

void write_metrics_csv(std::ostream& os, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_metrics_csv(std::istream& is);

}  // namespace risvi::harness
