#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "risvi/harness.hpp"
#include "risvi/inference.hpp"

namespace risvi::io {

// Fully-resolved run configuration. The JSON parser is strict: unknown keys
// anywhere in the document are an error.
struct RunConfig {
    std::uint64_t seed = 1;
    channel::SystemConfig scenario;
    inference::TrainConfig train;
    inference::HeadConfig heads;
    elbo::PriorParams priors;
    harness::ProtocolSpec protocol;
    std::vector<double> sweep_snr_db = {0.0, 10.0, 20.0, 30.0};
    int sweep_trials = 50;
    std::vector<harness::Method> sweep_methods = {harness::Method::PerfectCsi,
                                                  harness::Method::RandomPhase};
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Round-trippable echo with every default filled in.
std::string echo_run_config(const RunConfig& cfg);

// Channel/signal dataset: scenario header, pilot plan, cluster geometry,
// then per-record ground truth plus the simulated training signal. All
// payloads are little-endian doubles, complex values interleaved re/im.
struct Dataset {
    inference::EstimatorKind kind = inference::EstimatorKind::JCE;
    channel::SystemConfig cfg;
    std::uint64_t seed = 0;
    signal::PilotPlan plan;
    channel::ClusterSet clusters;
    inference::TrainingSet set;
};

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

// Versioned encoder checkpoint: scenario echo, pilot plan, head constants,
// priors, and both encoders (weights plus batch-norm statistics).
void write_checkpoint(const std::string& path, const inference::EncoderPair& model);
inference::EncoderPair read_checkpoint(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace risvi::io
